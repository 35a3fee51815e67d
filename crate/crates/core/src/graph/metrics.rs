use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{kcore_decomposition, mst, ActuatorGraph, GraphError, HopMatrix};

/// Closeness is `1 / Σ hops` by default; `Normalized` multiplies by `n - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosenessMode {
    #[default]
    Raw,
    Normalized,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    pub closeness: ClosenessMode,
}

pub fn closeness(hops: &HopMatrix, node: usize, mode: ClosenessMode) -> Result<f64, GraphError> {
    let n = hops.len();
    if n < 2 {
        return Err(GraphError::Singleton);
    }
    if node >= n {
        return Err(GraphError::NoSuchNode(node));
    }
    let total: u64 = hops.row(node).iter().map(|&h| h as u64).sum();
    let raw = 1.0 / total as f64;
    Ok(match mode {
        ClosenessMode::Raw => raw,
        ClosenessMode::Normalized => raw * (n - 1) as f64,
    })
}

pub fn eccentricity(hops: &HopMatrix, node: usize) -> u32 {
    hops.row(node).iter().copied().max().unwrap_or(0)
}

pub fn diameter(hops: &HopMatrix) -> u32 {
    (0..hops.len()).map(|i| eccentricity(hops, i)).max().unwrap_or(0)
}

pub fn radius(hops: &HopMatrix) -> u32 {
    (0..hops.len()).map(|i| eccentricity(hops, i)).min().unwrap_or(0)
}

/// Mean hop count over unordered pairs of distinct nodes.
pub fn average_path_length(hops: &HopMatrix) -> Result<f64, GraphError> {
    let n = hops.len();
    if n < 2 {
        return Err(GraphError::Singleton);
    }
    let mut total = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            total += hops.get(i, j) as u64;
        }
    }
    Ok(total as f64 / (n * (n - 1) / 2) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub degrees: Vec<usize>,
    pub mean: f64,
    /// Population variance (divides by the node count).
    pub variance: f64,
    /// `Pr[D = k]` for every degree present.
    pub distribution: BTreeMap<usize, f64>,
}

pub fn degree_stats(g: &ActuatorGraph) -> DegreeStats {
    let n = g.node_count();
    let degrees: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    if n == 0 {
        return DegreeStats {
            degrees,
            mean: 0.0,
            variance: 0.0,
            distribution: BTreeMap::new(),
        };
    }
    let mean = degrees.iter().sum::<usize>() as f64 / n as f64;
    let variance = degrees
        .iter()
        .map(|&d| (d as f64 - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in &degrees {
        *counts.entry(d).or_default() += 1;
    }
    let distribution = counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / n as f64))
        .collect();
    DegreeStats {
        degrees,
        mean,
        variance,
        distribution,
    }
}

/// Per-node and global metrics of one topology snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub node_ids: Vec<u32>,
    pub degree: Vec<usize>,
    pub eccentricity: Vec<u32>,
    pub closeness: Vec<f64>,
    pub coreness: Vec<usize>,
    pub diameter: u32,
    pub radius: u32,
    pub average_path_length: f64,
    pub degree_mean: f64,
    pub degree_variance: f64,
    pub degree_distribution: BTreeMap<usize, f64>,
    pub mst_total_km: f64,
    pub mst_great_circle_km: f64,
    /// Index pairs into `node_ids`.
    pub mst_edges: Vec<(usize, usize)>,
}

impl MetricsReport {
    pub fn compute(g: &ActuatorGraph, options: &MetricsOptions) -> Result<Self, GraphError> {
        let hops = g.hopcounts()?;
        let n = g.node_count();
        let eccentricity: Vec<u32> = (0..n).map(|i| eccentricity(&hops, i)).collect();
        let closeness = (0..n)
            .map(|i| closeness(&hops, i, options.closeness))
            .collect::<Result<Vec<_>, _>>()?;
        let stats = degree_stats(g);
        let tree = mst(g)?;
        Ok(Self {
            node_ids: g.node_ids().to_vec(),
            degree: stats.degrees,
            diameter: eccentricity.iter().copied().max().unwrap_or(0),
            radius: eccentricity.iter().copied().min().unwrap_or(0),
            eccentricity,
            closeness,
            coreness: kcore_decomposition(g),
            average_path_length: average_path_length(&hops)?,
            degree_mean: stats.mean,
            degree_variance: stats.variance,
            degree_distribution: stats.distribution,
            mst_total_km: tree.total_chord_km,
            mst_great_circle_km: tree.total_great_circle_km,
            mst_edges: tree.edges,
        })
    }

    pub fn mean_eccentricity(&self) -> f64 {
        if self.eccentricity.is_empty() {
            return 0.0;
        }
        self.eccentricity.iter().map(|&e| e as f64).sum::<f64>() / self.eccentricity.len() as f64
    }
}
