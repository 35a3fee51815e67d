//! Actuator graph built from Delaunay edges, and the hop-based metric suite.

mod kcore;
mod metrics;
mod mst;
mod summary;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::earth;
use crate::geometry::angular_distance;
use crate::tessellation::SphericalTriangulation;

pub use kcore::kcore_decomposition;
pub use metrics::{
    average_path_length, closeness, degree_stats, diameter, eccentricity, radius, ClosenessMode,
    DegreeStats, MetricsOptions, MetricsReport,
};
pub use mst::{mst, mst_by, MinimumSpanningTree, Weighting};
pub use summary::{summarize_run, EmptyRun, RunSummary, SnapshotExtent};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("graph is disconnected ({} components; first sizes {:?})", .components.len(), .components.iter().take(3).map(Vec::len).collect::<Vec<_>>())]
    Disconnected { components: Vec<Vec<u32>> },
    #[error("metric undefined on a graph with fewer than 2 nodes")]
    Singleton,
    #[error("edge ({0}, {1}) refers to a missing node or is a self-loop")]
    BadEdge(usize, usize),
    #[error("node index {0} out of range")]
    NoSuchNode(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub great_circle_km: f64,
    pub chord_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorGraph {
    node_ids: Vec<u32>,
    adjacency: Vec<Vec<usize>>,
    /// Sorted by `(a, b)` with `a < b`.
    edges: Vec<Edge>,
}

impl ActuatorGraph {
    /// Builds a graph over `node_ids` (indices into that list). Parallel
    /// edges collapse to the first occurrence.
    pub fn from_edges(
        node_ids: Vec<u32>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, GraphError> {
        let n = node_ids.len();
        let mut list: Vec<Edge> = Vec::new();
        for e in edges {
            if e.a >= n || e.b >= n || e.a == e.b {
                return Err(GraphError::BadEdge(e.a, e.b));
            }
            let (a, b) = (e.a.min(e.b), e.a.max(e.b));
            list.push(Edge { a, b, ..e });
        }
        list.sort_by_key(|e| (e.a, e.b));
        list.dedup_by_key(|e| (e.a, e.b));

        let mut adjacency = vec![Vec::new(); n];
        for e in &list {
            adjacency[e.a].push(e.b);
            adjacency[e.b].push(e.a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            node_ids,
            adjacency,
            edges: list,
        })
    }

    /// Unit-weight graph on nodes `0..n`, for tests and small fixtures.
    pub fn unweighted(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        Self::from_edges(
            (0..n as u32).collect(),
            edges.iter().map(|&(a, b)| Edge {
                a,
                b,
                great_circle_km: 1.0,
                chord_km: 1.0,
            }),
        )
    }

    /// Delaunay edges weighted by surface distance and chord, both scaled to Earth radius.
    pub fn from_triangulation(tri: &SphericalTriangulation) -> Self {
        let edges = tri.edges.iter().map(|&(a, b)| {
            let (u, v) = (tri.points[a].vector, tri.points[b].vector);
            Edge {
                a,
                b,
                great_circle_km: angular_distance(u, v) * earth::RADIUS_KM,
                chord_km: u.distance(v) * earth::RADIUS_KM,
            }
        });
        Self::from_edges(tri.points.iter().map(|p| p.actuator_id).collect(), edges)
            .expect("triangulation edges are valid")
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_ids(&self) -> &[u32] {
        &self.node_ids
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.node_ids.iter().position(|&x| x == id)
    }

    /// Connected components as actuator-id lists, largest first.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![self.node_ids[s]];
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(self.node_ids[v]);
                        queue.push_back(v);
                    }
                }
            }
            out.push(comp);
        }
        out.sort_by(|a, b| b.len().cmp(&a.len()));
        out
    }

    pub fn ensure_connected(&self) -> Result<(), GraphError> {
        let comps = self.components();
        if comps.len() > 1 {
            Err(GraphError::Disconnected { components: comps })
        } else {
            Ok(())
        }
    }

    /// All-pairs hop counts by one BFS per source.
    pub fn hopcounts(&self) -> Result<HopMatrix, GraphError> {
        use rayon::prelude::*;
        self.ensure_connected()?;
        let n = self.node_count();
        let rows: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|s| {
                let mut dist = vec![u32::MAX; n];
                dist[s] = 0;
                let mut queue = VecDeque::from([s]);
                while let Some(u) = queue.pop_front() {
                    for &v in &self.adjacency[u] {
                        if dist[v] == u32::MAX {
                            dist[v] = dist[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
                dist
            })
            .collect();
        Ok(HopMatrix {
            n,
            data: rows.concat(),
        })
    }
}

/// Dense symmetric matrix of shortest-path hop counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMatrix {
    n: usize,
    data: Vec<u32>,
}

impl HopMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}
