//! Spherical Delaunay triangulation and Voronoi diagram of actuator zenith points.
//!
//! For points on the unit sphere the convex hull faces are exactly the
//! spherical Delaunay triangles: the outward unit normal of a face is the
//! centre of a cap through its three vertices that no other point enters.
//! That holds whether or not the origin is inside the hull, so
//! hemisphere-confined inputs need no special path; only the Euler counts
//! change meaning (the surface is still a closed triangulated sphere).

mod geojson_export;
mod hull;
mod voronoi;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{angular_distance, orient3d, Vec3};
use crate::propagation::GeodeticPoint;

pub use geojson_export::{snapshot_geojson, GEOJSON_MAX_ARC_STEP_DEG};
pub use hull::HullError;
pub use voronoi::{locate_cell, voronoi_dual, SphericalVoronoi};

/// Zenith points closer than this (radians) are merged into one seed.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;
/// Insertion permutation seed; fixed so identical input gives identical output.
const INSERTION_SEED: u64 = 0x5DA_7E55;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TessellationError {
    #[error("need at least 4 distinct points, got {0}")]
    TooFewPoints(usize),
    #[error("all points lie on a single great circle")]
    FullDegeneracy,
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error(transparent)]
    Hull(#[from] HullError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSpherePoint {
    pub vector: Vec3,
    pub actuator_id: u32,
}

impl UnitSpherePoint {
    /// Normalizes `v`; `None` for a zero vector.
    pub fn new(v: Vec3, actuator_id: u32) -> Option<Self> {
        v.normalized().map(|vector| Self {
            vector,
            actuator_id,
        })
    }
}

/// Zenith projection: altitude is dropped.
pub fn project_to_unit_sphere(p: &GeodeticPoint, actuator_id: u32) -> UnitSpherePoint {
    UnitSpherePoint {
        vector: Vec3::from_lat_lon_deg(p.latitude_deg, p.longitude_deg),
        actuator_id,
    }
}

/// An actuator folded into another seed at the same zenith point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alias {
    pub actuator_id: u32,
    pub representative_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalTriangulation {
    /// Representative seeds, sorted by actuator id.
    pub points: Vec<UnitSpherePoint>,
    /// Counter-clockwise seen from outside the sphere.
    pub triangles: Vec<[usize; 3]>,
    /// Undirected, `(lo, hi)` and sorted.
    pub edges: Vec<(usize, usize)>,
    pub aliases: Vec<Alias>,
    /// Whether the origin lies strictly inside the hull of the seeds.
    pub origin_inside: bool,
}

impl SphericalTriangulation {
    pub fn vertex_count(&self) -> usize {
        self.points.len()
    }

    /// Edges as actuator-id pairs.
    pub fn id_edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges
            .iter()
            .map(|&(a, b)| (self.points[a].actuator_id, self.points[b].actuator_id))
    }

    /// Centre and angular radius of the cap through a triangle's vertices.
    pub fn circumcap(&self, triangle: usize) -> Option<(Vec3, f64)> {
        let [a, b, c] = self.triangles[triangle].map(|i| self.points[i].vector);
        let center = (b - a).cross(c - a).normalized()?;
        let radius = (angular_distance(center, a) + angular_distance(center, b) + angular_distance(center, c)) / 3.0;
        Some((center, radius))
    }
}

/// Merges near-coincident points. Returns representatives (lowest id wins)
/// and the alias table.
fn merge_duplicates(points: &[UnitSpherePoint]) -> (Vec<UnitSpherePoint>, Vec<Alias>) {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].vector.z.total_cmp(&points[b].vector.z));

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    // |Δz| bounds the chord, which bounds the angle from below.
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j].vector.z - points[i].vector.z > DUPLICATE_TOLERANCE {
                break;
            }
            if angular_distance(points[i].vector, points[j].vector) < DUPLICATE_TOLERANCE {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut reps = Vec::with_capacity(groups.len());
    let mut aliases = Vec::new();
    for members in groups.values() {
        let rep = *members
            .iter()
            .min_by_key(|&&i| (points[i].actuator_id, i))
            .expect("non-empty group");
        reps.push(points[rep]);
        for &m in members {
            if m != rep {
                aliases.push(Alias {
                    actuator_id: points[m].actuator_id,
                    representative_id: points[rep].actuator_id,
                });
            }
        }
    }
    reps.sort_by(|a, b| {
        a.actuator_id
            .cmp(&b.actuator_id)
            .then(a.vector.x.total_cmp(&b.vector.x))
            .then(a.vector.y.total_cmp(&b.vector.y))
            .then(a.vector.z.total_cmp(&b.vector.z))
    });
    aliases.sort_by_key(|a| (a.actuator_id, a.representative_id));
    (reps, aliases)
}

/// True when every point is within [`DUPLICATE_TOLERANCE`] of one great circle.
fn on_one_great_circle(points: &[UnitSpherePoint]) -> bool {
    let p0 = points[0].vector;
    let (best, cross) = points
        .iter()
        .map(|p| p0.cross(p.vector))
        .map(|c| (c.norm(), c))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("non-empty");
    if best < DUPLICATE_TOLERANCE {
        return true;
    }
    let normal = cross * (1.0 / best);
    points
        .iter()
        .all(|p| normal.dot(p.vector).abs().asin() <= DUPLICATE_TOLERANCE)
}

/// Seeds all on one small circle: triangulate both faces of the flat hull.
fn cocircular_triangles(points: &[UnitSpherePoint]) -> Vec<[usize; 3]> {
    let n = points.len();
    let centroid = points.iter().fold(Vec3::zero(), |acc, p| acc + p.vector) * (1.0 / n as f64);
    let normal = centroid.normalized().expect("small circle has an offset plane");
    let u = (points[0].vector - normal * normal.dot(points[0].vector))
        .normalized()
        .expect("point off the axis");
    let w = normal.cross(u);
    let mut ring: Vec<usize> = (0..n).collect();
    ring.sort_by(|&a, &b| {
        let ang = |i: usize| w.dot(points[i].vector).atan2(u.dot(points[i].vector));
        ang(a).total_cmp(&ang(b))
    });
    // Counter-clockwise around `normal`, so the outer fan keeps this order and
    // the inner (origin-facing) fan reverses it.
    let mut tris = Vec::with_capacity(2 * n - 4);
    for k in 1..n - 1 {
        tris.push([ring[0], ring[k], ring[k + 1]]);
    }
    for k in 2..n {
        tris.push([ring[1], ring[(k + 1) % n], ring[k]]);
    }
    tris
}

/// Spherical Delaunay triangulation of the given zenith points.
pub fn delaunay_on_sphere(points: &[UnitSpherePoint]) -> Result<SphericalTriangulation, TessellationError> {
    let (reps, aliases) = merge_duplicates(points);
    let n = reps.len();
    if n < 4 {
        return Err(TessellationError::TooFewPoints(n));
    }
    if on_one_great_circle(&reps) {
        return Err(TessellationError::FullDegeneracy);
    }

    let vectors: Vec<Vec3> = reps.iter().map(|p| p.vector).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(INSERTION_SEED));

    let triangles = match hull::convex_hull(&vectors, &order) {
        Ok(t) => t,
        Err(HullError::Coplanar) => cocircular_triangles(&reps),
        Err(e) => return Err(e.into()),
    };

    let mut edges: Vec<(usize, usize)> = triangles
        .iter()
        .flat_map(|t| (0..3).map(move |i| (t[i].min(t[(i + 1) % 3]), t[i].max(t[(i + 1) % 3]))))
        .collect();
    edges.sort_unstable();
    edges.dedup();

    let origin_inside = triangles
        .iter()
        .all(|t| orient3d(vectors[t[0]], vectors[t[1]], vectors[t[2]], Vec3::zero()) < 0.0);

    Ok(SphericalTriangulation {
        points: reps,
        triangles,
        edges,
        aliases,
        origin_inside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn pts(vs: &[[f64; 3]]) -> Vec<UnitSpherePoint> {
        vs.iter()
            .enumerate()
            .map(|(i, v)| UnitSpherePoint::new(Vec3::new(v[0], v[1], v[2]), i as u32).unwrap())
            .collect()
    }

    pub(crate) fn icosahedron() -> Vec<UnitSpherePoint> {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v = Vec::new();
        for &a in &[-1.0, 1.0] {
            for &b in &[-phi, phi] {
                v.push([0.0, a, b]);
                v.push([a, b, 0.0]);
                v.push([b, 0.0, a]);
            }
        }
        pts(&v)
    }

    #[test]
    fn projection_examples() {
        let p = |lat, lon| {
            project_to_unit_sphere(
                &GeodeticPoint {
                    latitude_deg: lat,
                    longitude_deg: lon,
                    altitude_km: 500.0,
                },
                1,
            )
            .vector
        };
        assert_eq!(p(0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let pole = p(90.0, 123.0);
        assert!(pole.x.abs() < 1e-15 && pole.y.abs() < 1e-15 && pole.z == 1.0);
        let v = p(45.0, 45.0);
        assert!((v.x - 0.5).abs() < 1e-15 && (v.y - 0.5).abs() < 1e-15);
        assert!((v.z - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn tetrahedron_counts() {
        let t = delaunay_on_sphere(&pts(&[[1., 1., 1.], [1., -1., -1.], [-1., 1., -1.], [-1., -1., 1.]])).unwrap();
        assert_eq!(t.triangles.len(), 4);
        assert_eq!(t.edges.len(), 6);
        assert!(t.origin_inside);
    }

    #[test]
    fn icosahedron_counts() {
        let t = delaunay_on_sphere(&icosahedron()).unwrap();
        assert_eq!(t.triangles.len(), 20);
        assert_eq!(t.edges.len(), 30);
    }

    #[test]
    fn duplicates_merge_to_lowest_id() {
        let mut p = icosahedron();
        let mut dup = p[3];
        dup.actuator_id = 100;
        p.insert(0, dup);
        let mut dup2 = p[4];
        dup2.actuator_id = 1;
        dup2.vector = Vec3::new(dup2.vector.x + 1e-12, dup2.vector.y, dup2.vector.z).normalized().unwrap();
        p[2] = dup2; // replaces original id 1 with a near copy of id 3
        let t = delaunay_on_sphere(&p).unwrap();
        assert_eq!(t.points.len(), 11);
        assert_eq!(
            t.aliases,
            vec![
                Alias { actuator_id: 3, representative_id: 1 },
                Alias { actuator_id: 100, representative_id: 1 },
            ]
        );
    }

    #[test]
    fn too_few_after_merge() {
        let p = pts(&[[1., 0., 0.], [1., 0., 0.], [0., 1., 0.], [0., 0., 1.]]);
        assert_eq!(delaunay_on_sphere(&p), Err(TessellationError::TooFewPoints(3)));
    }

    #[test]
    fn great_circle_is_degenerate() {
        let p: Vec<_> = (0..10)
            .map(|k| {
                let a = k as f64 * 0.6;
                UnitSpherePoint::new(Vec3::new(a.cos(), a.sin(), 0.0), k).unwrap()
            })
            .collect();
        assert_eq!(delaunay_on_sphere(&p), Err(TessellationError::FullDegeneracy));
    }

    #[test]
    fn small_circle_is_closed_triangulation() {
        let z = 0.5f64;
        let r = (1.0 - z * z).sqrt();
        let p: Vec<_> = (0..6)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 6.0;
                UnitSpherePoint {
                    vector: Vec3::new(r * a.cos(), r * a.sin(), z),
                    actuator_id: k,
                }
            })
            .collect();
        let t = delaunay_on_sphere(&p).unwrap();
        assert_eq!(t.triangles.len(), 2 * 6 - 4);
        assert_eq!(t.edges.len(), 3 * 6 - 6);
        assert!(!t.origin_inside);
    }

    #[test]
    fn hemisphere_input_still_closed() {
        let p: Vec<_> = (0..20u32)
            .map(|k| {
                let lat = 20.0 + 3.0 * (k % 5) as f64 + 0.1 * k as f64;
                let lon = 10.0 * (k / 5) as f64 + 1.3 * k as f64;
                project_to_unit_sphere(
                    &GeodeticPoint {
                        latitude_deg: lat,
                        longitude_deg: lon,
                        altitude_km: 0.0,
                    },
                    k,
                )
            })
            .collect();
        let t = delaunay_on_sphere(&p).unwrap();
        assert!(!t.origin_inside);
        assert_eq!(t.edges.len(), 3 * 20 - 6);
        for tri in 0..t.triangles.len() {
            let (c, r) = t.circumcap(tri).unwrap();
            for (i, q) in t.points.iter().enumerate() {
                if !t.triangles[tri].contains(&i) {
                    assert!(angular_distance(c, q.vector) >= r - 1e-9);
                }
            }
        }
    }
}
