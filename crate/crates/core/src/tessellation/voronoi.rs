use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{SphericalTriangulation, TessellationError, UnitSpherePoint};
use crate::geometry::{angular_distance, Vec3};

/// Angular distances closer than this are treated as ties in [`locate_cell`].
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalVoronoi {
    pub seeds: Vec<UnitSpherePoint>,
    /// One vertex per Delaunay triangle (its circumcentre).
    pub vertices: Vec<Vec3>,
    /// Per seed, vertex indices counter-clockwise seen from outside.
    pub cells: Vec<Vec<usize>>,
    /// Seed index pairs `(lo, hi)` whose cells share a boundary arc, sorted.
    pub adjacency: Vec<(usize, usize)>,
}

impl SphericalVoronoi {
    /// Boundary arcs as `(seed a, seed b, vertex u, vertex v)`.
    pub fn arcs(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut owners: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (seed, ring) in self.cells.iter().enumerate() {
            for k in 0..ring.len() {
                let (u, v) = (ring[k], ring[(k + 1) % ring.len()]);
                owners.entry((u.min(v), u.max(v))).or_default().push(seed);
            }
        }
        let mut arcs: Vec<_> = owners
            .into_iter()
            .filter(|(_, s)| s.len() == 2)
            .map(|((u, v), s)| (s[0].min(s[1]), s[0].max(s[1]), u, v))
            .collect();
        arcs.sort_unstable();
        arcs
    }
}

/// Dual Voronoi diagram: cell vertices are triangle circumcentres, rings are
/// built by walking the triangles around each seed.
pub fn voronoi_dual(tri: &SphericalTriangulation) -> Result<SphericalVoronoi, TessellationError> {
    let mut vertices = Vec::with_capacity(tri.triangles.len());
    for (i, t) in tri.triangles.iter().enumerate() {
        let [a, b, c] = t.map(|k| tri.points[k].vector);
        let n = (b - a).cross(c - a);
        let center = n
            .normalized()
            .filter(|_| n.norm() > 1e-30)
            .ok_or(TessellationError::DegenerateTriangle(i))?;
        vertices.push(center);
    }

    // Directed edge -> triangle holding it.
    let mut owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(tri.triangles.len() * 3);
    let mut incident = vec![usize::MAX; tri.points.len()];
    for (i, t) in tri.triangles.iter().enumerate() {
        for k in 0..3 {
            owner.insert((t[k], t[(k + 1) % 3]), i);
            incident[t[k]] = i;
        }
    }

    let mut cells = Vec::with_capacity(tri.points.len());
    for (seed, &start) in incident.iter().enumerate() {
        let mut ring = Vec::new();
        let mut current = start;
        loop {
            ring.push(current);
            let t = tri.triangles[current];
            let pos = t.iter().position(|&v| v == seed).expect("seed in triangle");
            // Triangle (seed, b, c): the next one counter-clockwise holds seed -> c.
            let c = t[(pos + 2) % 3];
            current = *owner
                .get(&(seed, c))
                .ok_or(TessellationError::DegenerateTriangle(current))?;
            if current == start {
                break;
            }
            if ring.len() > tri.triangles.len() {
                return Err(TessellationError::DegenerateTriangle(start));
            }
        }
        cells.push(ring);
    }

    let mut voronoi = SphericalVoronoi {
        seeds: tri.points.clone(),
        vertices,
        cells,
        adjacency: Vec::new(),
    };
    let mut adjacency: Vec<(usize, usize)> = voronoi.arcs().into_iter().map(|(a, b, _, _)| (a, b)).collect();
    adjacency.dedup();
    voronoi.adjacency = adjacency;
    Ok(voronoi)
}

/// Actuator id of the seed nearest (angularly) to `query`; ties go to the lowest id.
pub fn locate_cell(voronoi: &SphericalVoronoi, query: Vec3) -> Option<u32> {
    let mut best: Option<(f64, u32)> = None;
    for seed in &voronoi.seeds {
        let d = angular_distance(seed.vector, query);
        best = match best {
            None => Some((d, seed.actuator_id)),
            Some((bd, bid)) => {
                if d < bd - TIE_TOLERANCE || ((d - bd).abs() <= TIE_TOLERANCE && seed.actuator_id < bid) {
                    Some((d.min(bd), seed.actuator_id))
                } else {
                    Some((bd, bid))
                }
            }
        };
    }
    best.map(|(_, id)| id)
}
