//! Small 3-vector type and the sphere predicates the tessellation relies on.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Unit vector for a latitude/longitude pair in degrees.
    pub fn from_lat_lon_deg(lat: f64, lon: f64) -> Vec3 {
        let (slat, clat) = lat.to_radians().sin_cos();
        let (slon, clon) = lon.to_radians().sin_cos();
        Vec3::new(clat * clon, clat * slon, slat)
    }

    /// (latitude, longitude) in degrees of a direction.
    pub fn to_lat_lon_deg(self) -> (f64, f64) {
        let r = self.norm();
        let lat = (self.z / r).clamp(-1.0, 1.0).asin().to_degrees();
        let lon = if self.x == 0.0 && self.y == 0.0 {
            0.0
        } else {
            self.y.atan2(self.x).to_degrees()
        };
        (lat, lon)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Angle between two directions, stable near 0 and π.
pub fn angular_distance(u: Vec3, v: Vec3) -> f64 {
    u.cross(v).norm().atan2(u.dot(v))
}

fn coord(v: Vec3) -> robust::Coord3D<f64> {
    robust::Coord3D {
        x: v.x,
        y: v.y,
        z: v.z,
    }
}

/// Exact sign of `((b - a) × (c - a)) · (d - a)`.
///
/// Positive when `d` lies on the side the normal of the counter-clockwise
/// triangle `a, b, c` points to.
pub fn orient3d(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    // robust uses the opposite handedness.
    -robust::orient3d(coord(a), coord(b), coord(c), coord(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orient_sign_convention() {
        let o = Vec3::zero();
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        let z = Vec3::new(0.0, 0.0, 1.0);
        assert!(orient3d(o, x, y, z) > 0.0);
        assert!(orient3d(o, y, x, z) < 0.0);
        assert_eq!(orient3d(o, x, y, Vec3::new(3.0, -2.0, 0.0)), 0.0);
    }

    #[test]
    fn angular_distance_extremes() {
        let u = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(angular_distance(u, u), 0.0);
        assert!((angular_distance(u, -u) - std::f64::consts::PI).abs() < 1e-15);
        let v = Vec3::new(0.0, 1.0, 0.0);
        assert!((angular_distance(u, v) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn lat_lon_round_trip() {
        let v = Vec3::from_lat_lon_deg(45.0, 45.0);
        assert!((v.x - 0.5).abs() < 1e-15);
        assert!((v.y - 0.5).abs() < 1e-15);
        assert!((v.z - 0.5f64.sqrt()).abs() < 1e-15);
        let (lat, lon) = v.to_lat_lon_deg();
        assert!((lat - 45.0).abs() < 1e-12 && (lon - 45.0).abs() < 1e-12);
    }
}
