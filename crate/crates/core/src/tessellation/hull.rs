//! Randomized incremental 3D convex hull with a conflict graph.
//!
//! Every input point is expected to lie (numerically) on the unit sphere, so
//! every point ends up as a hull vertex. Orientation tests are exact. A point
//! exactly coplanar with a face is resolved as if later-inserted points sat
//! infinitesimally further out along their own direction.

use crate::geometry::{orient3d, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HullError {
    #[error("need at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("all points are coplanar")]
    Coplanar,
    #[error("hull construction produced an invalid surface: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    /// `nbr[i]` shares edge `v[i] -> v[(i + 1) % 3]`.
    nbr: [usize; 3],
    alive: bool,
    /// Sign of the origin relative to the face plane.
    origin_side: f64,
    conflicts: Vec<usize>,
}

struct Hull<'a> {
    pts: &'a [Vec3],
    faces: Vec<Face>,
    point_conflicts: Vec<Vec<usize>>,
    face_stamp: Vec<u32>,
    point_stamp: Vec<u32>,
    stamp: u32,
}

impl<'a> Hull<'a> {
    fn visible(&self, face: usize, p: usize) -> bool {
        let f = &self.faces[face];
        let [a, b, c] = f.v;
        let o = orient3d(self.pts[a], self.pts[b], self.pts[c], self.pts[p]);
        if o != 0.0 {
            return o > 0.0;
        }
        // p is pushed outward along itself: that lands on the positive side
        // exactly when the origin is on the negative side.
        f.origin_side <= 0.0
    }

    fn add_face(&mut self, v: [usize; 3]) -> usize {
        let origin_side = orient3d(self.pts[v[0]], self.pts[v[1]], self.pts[v[2]], Vec3::zero());
        self.faces.push(Face {
            v,
            nbr: [usize::MAX; 3],
            alive: true,
            origin_side,
            conflicts: Vec::new(),
        });
        self.face_stamp.push(0);
        self.faces.len() - 1
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp += 1;
        self.stamp
    }

    fn insert(&mut self, p: usize) -> Result<(), HullError> {
        let mut visible: Vec<usize> = self.point_conflicts[p]
            .iter()
            .copied()
            .filter(|&f| self.faces[f].alive)
            .collect();
        visible.sort_unstable();
        visible.dedup();
        if visible.is_empty() {
            // Rounding left p a hair inside the hull: attach it to the face it
            // is closest to being outside of.
            visible.push(self.least_hidden_face(p));
        }

        let stamp = self.next_stamp();
        for &f in &visible {
            self.face_stamp[f] = stamp;
        }

        // Horizon edges (a, b) with the hidden face across them.
        let mut horizon: Vec<(usize, usize, usize, usize)> = Vec::new();
        for &f in &visible {
            for i in 0..3 {
                let g = self.faces[f].nbr[i];
                if self.face_stamp[g] != stamp {
                    let a = self.faces[f].v[i];
                    let b = self.faces[f].v[(i + 1) % 3];
                    horizon.push((a, b, f, g));
                }
            }
        }
        if horizon.len() < 3 {
            return Err(HullError::Corrupt(format!(
                "horizon of point {p} has {} edges",
                horizon.len()
            )));
        }

        let mut by_start = std::collections::HashMap::with_capacity(horizon.len());
        let mut new_faces = Vec::with_capacity(horizon.len());
        for &(a, b, f, g) in &horizon {
            let nf = self.add_face([a, b, p]);
            self.faces[nf].nbr[0] = g;
            let slot = self.faces[g]
                .nbr
                .iter()
                .position(|&x| x == f)
                .ok_or_else(|| HullError::Corrupt("horizon neighbour not linked".into()))?;
            self.faces[g].nbr[slot] = nf;
            if by_start.insert(a, nf).is_some() {
                return Err(HullError::Corrupt(format!(
                    "horizon of point {p} is not a simple cycle"
                )));
            }
            new_faces.push((nf, f, g));
        }
        for &(nf, _, _) in &new_faces {
            let b = self.faces[nf].v[1];
            let next = *by_start
                .get(&b)
                .ok_or_else(|| HullError::Corrupt("open horizon".into()))?;
            self.faces[nf].nbr[1] = next;
            self.faces[next].nbr[2] = nf;
        }

        for &(nf, f, g) in &new_faces {
            let stamp = self.next_stamp();
            let mut candidates = std::mem::take(&mut self.faces[nf].conflicts);
            for src in [f, g] {
                for idx in 0..self.faces[src].conflicts.len() {
                    let q = self.faces[src].conflicts[idx];
                    if q == p || self.point_stamp[q] == stamp {
                        continue;
                    }
                    self.point_stamp[q] = stamp;
                    if self.visible(nf, q) {
                        candidates.push(q);
                    }
                }
            }
            for &q in &candidates {
                self.point_conflicts[q].push(nf);
            }
            self.faces[nf].conflicts = candidates;
        }

        for &f in &visible {
            self.faces[f].alive = false;
            self.faces[f].conflicts = Vec::new();
        }
        Ok(())
    }

    fn least_hidden_face(&self, p: usize) -> usize {
        let q = self.pts[p];
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive)
            .map(|(i, f)| {
                let [a, b, c] = f.v.map(|k| self.pts[k]);
                let n = (b - a).cross(c - a);
                let d = n.dot(q - a) / n.norm().max(f64::MIN_POSITIVE);
                (i, d)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(i, _)| i)
            .expect("hull has faces")
    }
}

/// Triangles of the convex hull, counter-clockwise seen from outside.
///
/// `order` is the insertion sequence (a permutation of point indices).
pub fn convex_hull(pts: &[Vec3], order: &[usize]) -> Result<Vec<[usize; 3]>, HullError> {
    let n = pts.len();
    if n < 4 {
        return Err(HullError::TooFewPoints(n));
    }
    debug_assert_eq!(order.len(), n);

    let i0 = order[0];
    let i1 = order[1..]
        .iter()
        .copied()
        .find(|&i| pts[i] != pts[i0])
        .ok_or(HullError::Coplanar)?;
    let i2 = order
        .iter()
        .copied()
        .find(|&i| {
            let c = (pts[i1] - pts[i0]).cross(pts[i] - pts[i0]);
            c != Vec3::zero()
        })
        .ok_or(HullError::Coplanar)?;
    let i3 = order
        .iter()
        .copied()
        .find(|&i| orient3d(pts[i0], pts[i1], pts[i2], pts[i]) != 0.0)
        .ok_or(HullError::Coplanar)?;

    let mut hull = Hull {
        pts,
        faces: Vec::with_capacity(2 * n + 8),
        point_conflicts: vec![Vec::new(); n],
        face_stamp: Vec::with_capacity(2 * n + 8),
        point_stamp: vec![0; n],
        stamp: 0,
    };

    let (b, c) = if orient3d(pts[i0], pts[i1], pts[i2], pts[i3]) > 0.0 {
        (i2, i1)
    } else {
        (i1, i2)
    };
    let a = i0;
    let d = i3;
    // Faces of the tetrahedron with d behind (a, b, c).
    let f0 = hull.add_face([a, b, c]);
    let f1 = hull.add_face([a, d, b]);
    let f2 = hull.add_face([b, d, c]);
    let f3 = hull.add_face([c, d, a]);
    hull.faces[f0].nbr = [f1, f2, f3];
    hull.faces[f1].nbr = [f3, f2, f0];
    hull.faces[f2].nbr = [f1, f3, f0];
    hull.faces[f3].nbr = [f2, f1, f0];

    let seeds = [i0, i1, i2, i3];
    let rest: Vec<usize> = order.iter().copied().filter(|i| !seeds.contains(i)).collect();
    for &q in &rest {
        for f in [f0, f1, f2, f3] {
            if hull.visible(f, q) {
                hull.faces[f].conflicts.push(q);
                hull.point_conflicts[q].push(f);
            }
        }
    }

    for &p in &rest {
        hull.insert(p)?;
    }

    let tris: Vec<[usize; 3]> = hull
        .faces
        .iter()
        .filter(|f| f.alive)
        .map(|f| f.v)
        .collect();
    validate_closed_surface(n, &tris)?;
    Ok(tris)
}

/// Every directed edge appears once and every vertex is used.
fn validate_closed_surface(n: usize, tris: &[[usize; 3]]) -> Result<(), HullError> {
    let mut directed = std::collections::HashSet::with_capacity(tris.len() * 3);
    let mut used = vec![false; n];
    for t in tris {
        for i in 0..3 {
            used[t[i]] = true;
            if !directed.insert((t[i], t[(i + 1) % 3])) {
                return Err(HullError::Corrupt(format!(
                    "edge {}->{} used twice",
                    t[i],
                    t[(i + 1) % 3]
                )));
            }
        }
    }
    for &(a, b) in &directed {
        if !directed.contains(&(b, a)) {
            return Err(HullError::Corrupt(format!("edge {a}->{b} has no twin")));
        }
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(HullError::Corrupt(format!("point {v} is not on the hull")));
    }
    if tris.len() != 2 * n - 4 {
        return Err(HullError::Corrupt(format!(
            "{} faces for {n} vertices",
            tris.len()
        )));
    }
    Ok(())
}
