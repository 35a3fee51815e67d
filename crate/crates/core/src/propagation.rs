//! Two-body propagation of TLE mean elements and projection to sub-satellite points.
//!
//! This is Keplerian propagation, not SGP4: no drag, no J2. Positions drift from
//! SGP4 by tens of km over a day in LEO, which does not change the tessellation
//! topology in any meaningful way.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::earth;
use crate::geometry::Vec3;
use crate::time::Timestamp;
use crate::tle::{Catalog, OrbitRegime, TleRecord};

const KEPLER_TOLERANCE: f64 = 1e-12;
const KEPLER_MAX_ITERATIONS: usize = 50;

/// Offset from epoch beyond which propagation is flagged as stale.
pub const STALE_ELEMENTS_SECONDS: f64 = 30.0 * 86_400.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PropagationError {
    #[error("Kepler solver did not converge (M = {mean_anomaly}, e = {eccentricity})")]
    KeplerDivergence { mean_anomaly: f64, eccentricity: f64 },
    #[error("eccentricity {0} outside [0, 1)")]
    Eccentricity(f64),
    #[error("position vector is zero; geodetic projection undefined")]
    ZeroPosition,
    #[error("actuator {0} is not in the catalog")]
    UnknownActuator(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EciState {
    /// km, Earth-centred inertial.
    pub position: Vec3,
    /// km/s.
    pub velocity: Vec3,
    pub epoch: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPoint {
    pub latitude_deg: f64,
    /// Normalized to (-180, 180].
    pub longitude_deg: f64,
    pub altitude_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    pub norad_id: u32,
    pub name: String,
    pub regime: OrbitRegime,
    pub eci: EciState,
    pub geodetic: GeodeticPoint,
    pub timestamp: Timestamp,
}

/// Solves `E - e sin E = M` by Newton iteration.
///
/// The returned anomaly lies on the same 2π branch as `mean_anomaly`.
pub fn solve_kepler(mean_anomaly: f64, eccentricity: f64) -> Result<f64, PropagationError> {
    if !(0.0..1.0).contains(&eccentricity) {
        return Err(PropagationError::Eccentricity(eccentricity));
    }
    let turns = (mean_anomaly / TAU).floor();
    let m = mean_anomaly - turns * TAU;
    let offset = turns * TAU;
    if eccentricity == 0.0 {
        return Ok(mean_anomaly);
    }

    let mut e_anom = if eccentricity < 0.8 { m } else { PI };
    for _ in 0..KEPLER_MAX_ITERATIONS {
        let residual = e_anom - eccentricity * e_anom.sin() - m;
        if residual.abs() <= KEPLER_TOLERANCE {
            return Ok(e_anom + offset);
        }
        let slope = 1.0 - eccentricity * e_anom.cos();
        e_anom -= residual / slope;
    }
    let residual = e_anom - eccentricity * e_anom.sin() - m;
    if residual.abs() <= KEPLER_TOLERANCE {
        Ok(e_anom + offset)
    } else {
        Err(PropagationError::KeplerDivergence {
            mean_anomaly,
            eccentricity,
        })
    }
}

/// Inertial state of `record` at time `t` under two-body motion.
pub fn mean_elements_to_state(record: &TleRecord, t: Timestamp) -> Result<EciState, PropagationError> {
    let dt = t.seconds_since(record.epoch());
    if dt.abs() > STALE_ELEMENTS_SECONDS {
        log_stale(record.norad_id, dt);
    }
    let e = record.eccentricity;
    let n = record.mean_motion_rad_per_sec();
    let a = record.semi_major_axis_km();
    let m = record.mean_anomaly_deg.to_radians() + n * dt;
    let ecc_anom = solve_kepler(m, e)?;

    let (sin_e, cos_e) = ecc_anom.sin_cos();
    let root = (1.0 - e * e).sqrt();
    let r = a * (1.0 - e * cos_e);
    let p_perifocal = [a * (cos_e - e), a * root * sin_e];
    let vfac = (earth::MU_KM3_S2 * a).sqrt() / r;
    let v_perifocal = [-vfac * sin_e, vfac * root * cos_e];

    let rot = perifocal_to_inertial(
        record.raan_deg.to_radians(),
        record.inclination_deg.to_radians(),
        record.arg_perigee_deg.to_radians(),
    );
    let apply = |v: [f64; 2]| {
        Vec3::new(
            rot[0][0] * v[0] + rot[0][1] * v[1],
            rot[1][0] * v[0] + rot[1][1] * v[1],
            rot[2][0] * v[0] + rot[2][1] * v[1],
        )
    };
    Ok(EciState {
        position: apply(p_perifocal),
        velocity: apply(v_perifocal),
        epoch: t,
    })
}

#[cold]
fn log_stale(norad_id: u32, dt: f64) {
    log::warn!(
        "propagating {norad_id} {:.1} days from its element epoch",
        dt / 86_400.0
    );
}

/// First two columns of R3(-Ω)·R1(-i)·R3(-ω).
fn perifocal_to_inertial(raan: f64, incl: f64, argp: f64) -> [[f64; 2]; 3] {
    let (so, co) = raan.sin_cos();
    let (si, ci) = incl.sin_cos();
    let (sw, cw) = argp.sin_cos();
    [
        [co * cw - so * sw * ci, -co * sw - so * cw * ci],
        [so * cw + co * sw * ci, -so * sw + co * cw * ci],
        [sw * si, cw * si],
    ]
}

/// Greenwich mean sidereal time (IAU 1982), radians in [0, 2π). UT1 is taken as UTC.
pub fn gmst(t: Timestamp) -> f64 {
    let centuries = (t.julian_date() - 2_451_545.0) / 36_525.0;
    let seconds = 67_310.548_41
        + (876_600.0 * 3_600.0 + 8_640_184.812_866) * centuries
        + 0.093_104 * centuries * centuries
        - 6.2e-6 * centuries * centuries * centuries;
    (seconds * TAU / 86_400.0).rem_euclid(TAU)
}

fn normalize_longitude(deg: f64) -> f64 {
    let mut lon = deg.rem_euclid(360.0);
    if lon > 180.0 {
        lon -= 360.0;
    }
    if lon <= -180.0 {
        lon += 360.0;
    }
    lon
}

/// Sub-satellite point on a spherical Earth.
pub fn eci_to_geodetic(state: &EciState) -> Result<GeodeticPoint, PropagationError> {
    let p = state.position;
    let r = p.norm();
    if r == 0.0 {
        return Err(PropagationError::ZeroPosition);
    }
    let theta = gmst(state.epoch);
    let (s, c) = theta.sin_cos();
    let x = c * p.x + s * p.y;
    let y = -s * p.x + c * p.y;
    let latitude_deg = (p.z / r).clamp(-1.0, 1.0).asin().to_degrees();
    let longitude_deg = if x == 0.0 && y == 0.0 {
        0.0
    } else {
        normalize_longitude(y.atan2(x).to_degrees())
    };
    Ok(GeodeticPoint {
        latitude_deg,
        longitude_deg,
        altitude_km: r - earth::RADIUS_KM,
    })
}

/// Inverse of [`eci_to_geodetic`] for the position part.
pub fn geodetic_to_eci_position(point: &GeodeticPoint, t: Timestamp) -> Vec3 {
    let r = earth::RADIUS_KM + point.altitude_km;
    let lat = point.latitude_deg.to_radians();
    let lon = point.longitude_deg.to_radians() + gmst(t);
    Vec3::new(
        r * lat.cos() * lon.cos(),
        r * lat.cos() * lon.sin(),
        r * lat.sin(),
    )
}

/// Propagates the requested actuators to `t`, preserving the order of `subset`.
pub fn propagate_catalog(
    catalog: &Catalog,
    t: Timestamp,
    subset: &[u32],
) -> Result<Vec<ActuatorState>, PropagationError> {
    subset
        .par_iter()
        .map(|&id| {
            let idx = catalog
                .index_of(id)
                .ok_or(PropagationError::UnknownActuator(id))?;
            let record = &catalog.records()[idx];
            let eci = mean_elements_to_state(record, t)?;
            let geodetic = eci_to_geodetic(&eci)?;
            Ok(ActuatorState {
                norad_id: id,
                name: record.name.clone(),
                regime: catalog.regime_of(idx),
                eci,
                geodetic,
                timestamp: t,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect_kepler(m: f64, e: f64) -> f64 {
        // f(E) = E - e sin E - M is monotone; M in [0, 2π) brackets E in [0, 2π].
        let (mut lo, mut hi) = (0.0f64, TAU);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - e * mid.sin() - m < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn kepler_examples() {
        assert_eq!(solve_kepler(1.2, 0.0).unwrap(), 1.2);
        assert_eq!(solve_kepler(PI, 0.5).unwrap(), PI);
        let e = solve_kepler(0.5, 0.1).unwrap();
        let oracle = bisect_kepler(0.5, 0.1);
        assert!((e - oracle).abs() < 1e-12, "{e} vs {oracle}");
        assert!((e - 0.1 * e.sin() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn kepler_keeps_branch() {
        let m = 0.5 + 4.0 * TAU;
        let e = solve_kepler(m, 0.3).unwrap();
        assert!((e - 0.3 * e.sin() - m).abs() <= 1e-11);
        let neg = solve_kepler(-0.5, 0.3).unwrap();
        assert!((neg - 0.3 * neg.sin() + 0.5).abs() <= 1e-12);
    }

    #[test]
    fn kepler_rejects_hyperbolic() {
        assert!(matches!(solve_kepler(1.0, 1.0), Err(PropagationError::Eccentricity(_))));
    }

    #[test]
    fn gmst_at_j2000() {
        let t = Timestamp::parse_iso8601("2000-01-01T12:00:00Z").unwrap();
        // 67310.54841 s of sidereal time, converted by hand.
        let expected = 67_310.548_41 / 86_400.0 * TAU;
        assert!((gmst(t) - expected).abs() < 1e-9);
        assert!((gmst(t) - 4.894961).abs() < 1e-6);
    }

    #[test]
    fn gmst_sidereal_period() {
        let t = Timestamp::parse_iso8601("2018-04-25T00:00:00Z").unwrap();
        let later = t.add_seconds(86_164.0905);
        let diff = (gmst(later) - gmst(t) + PI).rem_euclid(TAU) - PI;
        assert!(diff.abs() < 1e-6, "diff {diff}");
    }

    #[test]
    fn gmst_monotone_over_an_hour() {
        let t0 = Timestamp::parse_iso8601("2021-06-01T03:00:00Z").unwrap();
        let mut prev = gmst(t0);
        for k in 1..=60 {
            let g = gmst(t0.add_seconds(60.0 * k as f64));
            let step = (g - prev).rem_euclid(TAU);
            assert!(step > 0.0 && step < 0.01);
            prev = g;
        }
    }

    #[test]
    fn x_axis_geo_projection() {
        // Pick the instant where gmst is (numerically) zero by stepping back.
        let t0 = Timestamp::parse_iso8601("2000-01-01T12:00:00Z").unwrap();
        let rate = TAU / 86_164.0905;
        let t = t0.add_seconds(-gmst(t0) / rate);
        assert!(gmst(t).min(TAU - gmst(t)) < 1e-4);
        let state = EciState {
            position: Vec3::new(42_164.0, 0.0, 0.0),
            velocity: Vec3::zero(),
            epoch: t,
        };
        let g = eci_to_geodetic(&state).unwrap();
        assert!(g.latitude_deg.abs() < 1e-12);
        assert!(g.longitude_deg.abs() < 1e-2);
        assert!((g.altitude_km - 35_785.863).abs() < 1e-9);
    }

    #[test]
    fn pole_has_zero_longitude() {
        let state = EciState {
            position: Vec3::new(0.0, 0.0, 7000.0),
            velocity: Vec3::zero(),
            epoch: Timestamp::from_millis(0),
        };
        let g = eci_to_geodetic(&state).unwrap();
        assert_eq!(g.latitude_deg, 90.0);
        assert_eq!(g.longitude_deg, 0.0);
    }

    #[test]
    fn zero_vector_rejected() {
        let state = EciState {
            position: Vec3::zero(),
            velocity: Vec3::zero(),
            epoch: Timestamp::from_millis(0),
        };
        assert_eq!(eci_to_geodetic(&state), Err(PropagationError::ZeroPosition));
    }

    #[test]
    fn longitude_range_is_half_open() {
        assert_eq!(normalize_longitude(-180.0), 180.0);
        assert_eq!(normalize_longitude(180.0), 180.0);
        assert_eq!(normalize_longitude(540.0), 180.0);
        assert!((normalize_longitude(-190.0) - 170.0).abs() < 1e-12);
    }
}
