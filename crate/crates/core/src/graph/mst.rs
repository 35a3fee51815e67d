use serde::{Deserialize, Serialize};

use super::{ActuatorGraph, GraphError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    Chord,
    GreatCircle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumSpanningTree {
    /// `(lo, hi)` node-index pairs in the order Kruskal accepted them.
    pub edges: Vec<(usize, usize)>,
    pub total_chord_km: f64,
    pub total_great_circle_km: f64,
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Minimum spanning tree over the graph's edges weighted by chord length.
pub fn mst(g: &ActuatorGraph) -> Result<MinimumSpanningTree, GraphError> {
    mst_by(g, Weighting::Chord)
}

/// Kruskal; equal weights fall back to `(lo, hi)` index order.
pub fn mst_by(g: &ActuatorGraph, weighting: Weighting) -> Result<MinimumSpanningTree, GraphError> {
    g.ensure_connected()?;
    let weight = |i: usize| {
        let e = &g.edges()[i];
        match weighting {
            Weighting::Chord => e.chord_km,
            Weighting::GreatCircle => e.great_circle_km,
        }
    };
    let mut order: Vec<usize> = (0..g.edge_count()).collect();
    order.sort_by(|&x, &y| {
        weight(x)
            .total_cmp(&weight(y))
            .then((g.edges()[x].a, g.edges()[x].b).cmp(&(g.edges()[y].a, g.edges()[y].b)))
    });

    let mut sets = DisjointSet::new(g.node_count());
    let mut tree = MinimumSpanningTree {
        edges: Vec::with_capacity(g.node_count().saturating_sub(1)),
        total_chord_km: 0.0,
        total_great_circle_km: 0.0,
    };
    for i in order {
        let e = g.edges()[i];
        if sets.union(e.a, e.b) {
            tree.edges.push((e.a, e.b));
            tree.total_chord_km += e.chord_km;
            tree.total_great_circle_km += e.great_circle_km;
            if tree.edges.len() + 1 == g.node_count() {
                break;
            }
        }
    }
    Ok(tree)
}
