//! End-to-end driver: sample actuators, step time, rebuild the topology at
//! every step, compute metrics and optionally run a consensus round.

mod export;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consensus::{
    assign_roles_degree, assign_roles_kcore, default_role_counts, run_round, ConsensusError,
    RoleAssignment, RoleStrategy, RoundTranscript,
};
use crate::graph::{
    summarize_run, ActuatorGraph, GraphError, MetricsOptions, MetricsReport, RunSummary,
    SnapshotExtent,
};
use crate::propagation::{propagate_catalog, ActuatorState};
use crate::tessellation::{
    delaunay_on_sphere, project_to_unit_sphere, voronoi_dual, Alias, SphericalTriangulation,
    SphericalVoronoi,
};
use crate::time::Timestamp;
use crate::tle::{Catalog, OrbitRegime};

pub use export::{
    export_csv, export_geojson, read_edges_csv, read_globals_csv, read_nodes_csv,
    records_from_csv, summaries_from_globals, write_summary_csv, EdgeCsvRow, GlobalCsvRow,
    NodeCsvRow, ALIASES_HEADER, EDGES_HEADER, GLOBALS_HEADER, NODES_HEADER, SUMMARY_HEADER,
};

/// Smallest actuator subset the tessellation accepts.
pub const MIN_ACTUATORS: usize = 4;

/// 5, 15, ..., 95.
pub fn default_fractions() -> Vec<f64> {
    (0..10).map(|k| 5.0 + 10.0 * k as f64).collect()
}

/// The percentages reported per regime in the published summary table.
pub fn table1_fractions(regime: OrbitRegime) -> Vec<f64> {
    let top = if regime == OrbitRegime::Leo { 90 } else { 70 };
    (10..=top).step_by(10).map(f64::from).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{regime} bucket has {bucket} actuators; {fraction}% gives fewer than {MIN_ACTUATORS}")]
    BucketTooSmall {
        regime: OrbitRegime,
        fraction: f64,
        bucket: usize,
    },
    #[error("no records to export")]
    EmptyRecords,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSettings {
    pub strategy: RoleStrategy,
    /// Defaults to ⌈10%⌉ of the snapshot's nodes.
    pub approvers: Option<usize>,
    /// Defaults to ⌈5%⌉ of the snapshot's nodes.
    pub verifiers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub regime: OrbitRegime,
    /// Percentages of the regime bucket, each in (0, 100].
    pub fractions: Vec<f64>,
    pub time_step_s: u64,
    pub duration_s: u64,
    /// `None` starts at the latest element epoch in the catalog.
    pub start_time: Option<Timestamp>,
    pub rng_seed: u64,
    pub consensus: Option<ConsensusSettings>,
    pub closeness: crate::graph::ClosenessMode,
    pub geojson: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            regime: OrbitRegime::Leo,
            fractions: default_fractions(),
            time_step_s: 600,
            duration_s: 86_400,
            start_time: None,
            rng_seed: 0,
            consensus: None,
            closeness: Default::default(),
            geojson: false,
            output_dir: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.fractions.is_empty() {
            return Err(SimulationError::Config("no fractions given".into()));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 100.0)) {
            return Err(SimulationError::Config(format!("fraction {f} outside (0, 100]")));
        }
        if self.time_step_s == 0 {
            return Err(SimulationError::Config("time step must be positive".into()));
        }
        if self.duration_s < self.time_step_s {
            return Err(SimulationError::Config(format!(
                "duration {} s is shorter than the time step {} s",
                self.duration_s, self.time_step_s
            )));
        }
        Ok(())
    }

    /// Snapshot times while elapsed time < duration.
    pub fn timestamps(&self, start: Timestamp) -> Vec<Timestamp> {
        let steps = self.duration_s.div_ceil(self.time_step_s);
        (0..steps)
            .map(|k| Timestamp::from_millis(start.millis() + (k * self.time_step_s * 1000) as i64))
            .collect()
    }
}

/// Subset size for a fraction: round half up, never below [`MIN_ACTUATORS`].
pub fn sample_size(bucket: usize, fraction: f64) -> usize {
    ((fraction / 100.0 * bucket as f64 + 0.5).floor() as usize).max(MIN_ACTUATORS)
}

/// Uniform sample without replacement, returned in catalog order.
pub fn sample_actuators(
    catalog: &Catalog,
    regime: OrbitRegime,
    fraction: f64,
    rng_seed: u64,
) -> Result<Vec<u32>, SimulationError> {
    if !(fraction > 0.0 && fraction <= 100.0) {
        return Err(SimulationError::Config(format!("fraction {fraction} outside (0, 100]")));
    }
    let bucket = catalog.bucket(regime);
    let size = sample_size(bucket.len(), fraction);
    if size > bucket.len() {
        return Err(SimulationError::BucketTooSmall {
            regime,
            fraction,
            bucket: bucket.len(),
        });
    }
    let ids = |idx: &mut dyn Iterator<Item = usize>| -> Vec<u32> {
        idx.map(|i| catalog.records()[bucket[i]].norad_id).collect()
    };
    if fraction == 100.0 {
        return Ok(ids(&mut (0..bucket.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut picked = rand::seq::index::sample(&mut rng, bucket.len(), size).into_vec();
    picked.sort_unstable();
    Ok(ids(&mut picked.into_iter()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub norad_id: u32,
    pub name: String,
    pub regime: OrbitRegime,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_km: f64,
    pub degree: usize,
    pub eccentricity: u32,
    pub closeness: f64,
    pub coreness: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRow {
    pub node_count: usize,
    pub edge_count: usize,
    pub diameter: u32,
    pub radius: u32,
    pub avg_path_length: f64,
    pub degree_mean: f64,
    pub degree_variance: f64,
    pub mst_total_km: f64,
    /// Per-node mean eccentricity; not part of globals.csv.
    pub mean_node_eccentricity: f64,
}

impl GlobalRow {
    pub fn extent(&self) -> SnapshotExtent {
        SnapshotExtent {
            diameter: self.diameter,
            radius: self.radius,
            max_eccentricity: self.diameter,
            mean_eccentricity: self.mean_node_eccentricity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub norad_a: u32,
    pub norad_b: u32,
    pub great_circle_km: f64,
    pub chord_km: f64,
    pub in_mst: bool,
}

/// One topology snapshot of one `(regime, fraction)` run.
#[derive(Debug, Clone)]
pub struct TimeSeriesRecord {
    pub timestamp: Timestamp,
    pub fraction_pct: f64,
    pub regime: OrbitRegime,
    pub nodes: Vec<NodeRow>,
    pub edges: Vec<EdgeRow>,
    /// `None` when the snapshot is invalid.
    pub global: Option<GlobalRow>,
    pub aliases: Vec<Alias>,
    /// Why the snapshot could not be built.
    pub invalid: Option<String>,
    pub consensus: Option<RoundTranscript>,
    pub geometry: Option<Box<(SphericalTriangulation, SphericalVoronoi)>>,
}

impl TimeSeriesRecord {
    fn failed(timestamp: Timestamp, fraction_pct: f64, regime: OrbitRegime, why: String) -> Self {
        log::warn!("snapshot {timestamp} at {fraction_pct}% invalid: {why}");
        Self {
            timestamp,
            fraction_pct,
            regime,
            nodes: Vec::new(),
            edges: Vec::new(),
            global: None,
            aliases: Vec::new(),
            invalid: Some(why),
            consensus: None,
            geometry: None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.invalid.is_none()
    }
}

/// Per-snapshot knobs shared by the driver and the CSV recomputation path.
#[derive(Debug, Clone, Default)]
pub struct SnapshotOptions {
    pub metrics: MetricsOptions,
    pub consensus: Option<ConsensusSettings>,
    pub rng_seed: u64,
    pub keep_geometry: bool,
}

/// Per-node and global rows for a graph whose node ids key into `states`.
fn rows_from_graph(
    g: &ActuatorGraph,
    states: &HashMap<u32, NodeRow>,
    options: &MetricsOptions,
) -> Result<(Vec<NodeRow>, Vec<EdgeRow>, GlobalRow), GraphError> {
    let report = MetricsReport::compute(g, options)?;
    let nodes = report
        .node_ids
        .iter()
        .enumerate()
        .map(|(i, id)| NodeRow {
            degree: report.degree[i],
            eccentricity: report.eccentricity[i],
            closeness: report.closeness[i],
            coreness: report.coreness[i],
            ..states[id].clone()
        })
        .collect();
    let in_mst: std::collections::HashSet<(usize, usize)> = report.mst_edges.iter().copied().collect();
    let edges = g
        .edges()
        .iter()
        .map(|e| EdgeRow {
            norad_a: g.node_ids()[e.a],
            norad_b: g.node_ids()[e.b],
            great_circle_km: e.great_circle_km,
            chord_km: e.chord_km,
            in_mst: in_mst.contains(&(e.a, e.b)),
        })
        .collect();
    let global = GlobalRow {
        node_count: g.node_count(),
        edge_count: g.edge_count(),
        diameter: report.diameter,
        radius: report.radius,
        avg_path_length: report.average_path_length,
        degree_mean: report.degree_mean,
        degree_variance: report.degree_variance,
        mst_total_km: report.mst_total_km,
        mean_node_eccentricity: report.mean_eccentricity(),
    };
    Ok((nodes, edges, global))
}

/// Canonical bytes a snapshot's consensus round signs.
fn snapshot_payload(timestamp: Timestamp, edges: &[EdgeRow]) -> Vec<u8> {
    let mut out = timestamp.to_iso8601().into_bytes();
    for e in edges {
        out.extend_from_slice(format!(";{}-{}", e.norad_a, e.norad_b).as_bytes());
    }
    out
}

fn consensus_round(
    g: &ActuatorGraph,
    settings: &ConsensusSettings,
    timestamp: Timestamp,
    edges: &[EdgeRow],
    seed: u64,
) -> Result<RoundTranscript, ConsensusError> {
    let by_degree = || {
        let (da, dv) = default_role_counts(g.node_count());
        assign_roles_degree(
            g,
            settings.approvers.unwrap_or(da),
            settings.verifiers.unwrap_or(dv),
        )
    };
    let assignment: RoleAssignment = match settings.strategy {
        RoleStrategy::DegreeMode => by_degree()?,
        RoleStrategy::KCoreShell => match assign_roles_kcore(g) {
            Err(e) if e.is_fallback_signal() => {
                log::info!("{timestamp}: {e}; using degree roles");
                by_degree()?
            }
            other => other?,
        },
    };
    let assignment = assignment.with_time(timestamp);
    let round = run_round(
        &snapshot_payload(timestamp, edges),
        &assignment,
        g,
        &BTreeMap::new(),
        seed,
    )?;
    Ok(RoundTranscript::from_round(&round))
}

/// Builds one snapshot from already-propagated actuator states.
pub fn snapshot_from_states(
    states: &[ActuatorState],
    timestamp: Timestamp,
    fraction_pct: f64,
    regime: OrbitRegime,
    options: &SnapshotOptions,
) -> TimeSeriesRecord {
    let points: Vec<_> = states
        .iter()
        .map(|s| project_to_unit_sphere(&s.geodetic, s.norad_id))
        .collect();
    let tri = match delaunay_on_sphere(&points) {
        Ok(t) => t,
        Err(e) => return TimeSeriesRecord::failed(timestamp, fraction_pct, regime, e.to_string()),
    };
    let by_id: HashMap<u32, NodeRow> = states
        .iter()
        .map(|s| {
            (
                s.norad_id,
                NodeRow {
                    norad_id: s.norad_id,
                    name: s.name.clone(),
                    regime: s.regime,
                    latitude_deg: s.geodetic.latitude_deg,
                    longitude_deg: s.geodetic.longitude_deg,
                    altitude_km: s.geodetic.altitude_km,
                    degree: 0,
                    eccentricity: 0,
                    closeness: 0.0,
                    coreness: 0,
                },
            )
        })
        .collect();
    let g = ActuatorGraph::from_triangulation(&tri);
    let (nodes, edges, global) = match rows_from_graph(&g, &by_id, &options.metrics) {
        Ok(rows) => rows,
        Err(e) => return TimeSeriesRecord::failed(timestamp, fraction_pct, regime, e.to_string()),
    };
    let consensus = options.consensus.as_ref().and_then(|settings| {
        consensus_round(&g, settings, timestamp, &edges, options.rng_seed)
            .map_err(|e| log::warn!("{timestamp} at {fraction_pct}%: consensus skipped: {e}"))
            .ok()
    });
    let geometry = if options.keep_geometry {
        match voronoi_dual(&tri) {
            Ok(v) => Some(Box::new((tri.clone(), v))),
            Err(e) => {
                return TimeSeriesRecord::failed(timestamp, fraction_pct, regime, e.to_string())
            }
        }
    } else {
        None
    };
    TimeSeriesRecord {
        timestamp,
        fraction_pct,
        regime,
        nodes,
        edges,
        global: Some(global),
        aliases: tri.aliases.clone(),
        invalid: None,
        consensus,
        geometry,
    }
}

/// Rebuilds node, edge and global rows from a given graph, as the CSV
/// recomputation path does.
pub fn snapshot_from_graph(
    g: &ActuatorGraph,
    node_info: &HashMap<u32, NodeRow>,
    timestamp: Timestamp,
    fraction_pct: f64,
    regime: OrbitRegime,
    options: &SnapshotOptions,
) -> TimeSeriesRecord {
    match rows_from_graph(g, node_info, &options.metrics) {
        Ok((nodes, edges, global)) => {
            let consensus = options.consensus.as_ref().and_then(|settings| {
                consensus_round(g, settings, timestamp, &edges, options.rng_seed).ok()
            });
            TimeSeriesRecord {
                timestamp,
                fraction_pct,
                regime,
                nodes,
                edges,
                global: Some(global),
                aliases: Vec::new(),
                invalid: None,
                consensus,
                geometry: None,
            }
        }
        Err(e) => TimeSeriesRecord::failed(timestamp, fraction_pct, regime, e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub regime: OrbitRegime,
    pub fraction_pct: f64,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    /// Sorted by fraction, then timestamp.
    pub records: Vec<TimeSeriesRecord>,
    pub summaries: Vec<SummaryRow>,
    pub samples: BTreeMap<String, Vec<u32>>,
}

/// Folds valid snapshots per fraction into summary rows, in fraction order.
pub fn summarize_records(records: &[TimeSeriesRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(OrbitRegime, f64, Vec<SnapshotExtent>)> = Vec::new();
    for r in records {
        let extent = r.global.as_ref().map(GlobalRow::extent);
        match groups
            .iter_mut()
            .find(|(reg, f, _)| *reg == r.regime && *f == r.fraction_pct)
        {
            Some(g) => g.2.extend(extent),
            None => groups.push((r.regime, r.fraction_pct, extent.into_iter().collect())),
        }
    }
    groups
        .into_iter()
        .filter_map(|(regime, fraction_pct, extents)| match summarize_run(&extents) {
            Ok(summary) => Some(SummaryRow {
                regime,
                fraction_pct,
                summary,
            }),
            Err(_) => {
                log::warn!("{regime} at {fraction_pct}%: no valid snapshots to summarize");
                None
            }
        })
        .collect()
}

pub fn run_simulation(
    config: &SimulationConfig,
    catalog: &Catalog,
) -> Result<SimulationOutput, SimulationError> {
    config.validate()?;
    let start = match config.start_time {
        Some(t) => t,
        None => catalog
            .records()
            .iter()
            .map(|r| r.epoch())
            .max()
            .ok_or_else(|| SimulationError::Config("catalog is empty".into()))?,
    };
    let mut fractions = config.fractions.clone();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();

    let mut samples = BTreeMap::new();
    let mut subsets = Vec::with_capacity(fractions.len());
    for &f in &fractions {
        let ids = sample_actuators(catalog, config.regime, f, config.rng_seed)?;
        samples.insert(format!("{f}"), ids.clone());
        subsets.push((f, ids));
    }

    let times = config.timestamps(start);
    let options = SnapshotOptions {
        metrics: MetricsOptions {
            closeness: config.closeness,
        },
        consensus: config.consensus.clone(),
        rng_seed: config.rng_seed,
        keep_geometry: config.geojson,
    };
    let jobs: Vec<(usize, Timestamp)> = (0..subsets.len())
        .flat_map(|i| times.iter().map(move |&t| (i, t)))
        .collect();
    let records: Vec<TimeSeriesRecord> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let (fraction, ids) = &subsets[i];
            match propagate_catalog(catalog, t, ids) {
                Ok(states) => snapshot_from_states(&states, t, *fraction, config.regime, &options),
                Err(e) => TimeSeriesRecord::failed(t, *fraction, config.regime, e.to_string()),
            }
        })
        .collect();

    let summaries = summarize_records(&records);
    Ok(SimulationOutput {
        records,
        summaries,
        samples,
    })
}
