//! Space domain awareness actuator topology: TLE ingestion, two-body
//! propagation, spherical Voronoi/Delaunay tessellation of zenith points,
//! hop-based graph metrics and a two-tier approver/verifier consensus round.

pub mod consensus;
pub mod geometry;
pub mod graph;
pub mod propagation;
pub mod simulation;
pub mod tessellation;
pub mod time;
pub mod tle;

/// WGS-84 constants used throughout.
pub mod earth {
    /// Gravitational parameter, km^3/s^2.
    pub const MU_KM3_S2: f64 = 398_600.4418;
    /// Equatorial radius, km.
    pub const RADIUS_KM: f64 = 6378.137;
}

pub use geometry::Vec3;
pub use graph::{ActuatorGraph, GraphError, MetricsOptions, MetricsReport, RunSummary};
pub use propagation::{ActuatorState, GeodeticPoint, PropagationError};
pub use tessellation::{SphericalTriangulation, SphericalVoronoi, TessellationError, UnitSpherePoint};
pub use time::Timestamp;
pub use tle::{Catalog, OrbitRegime, TleError, TleRecord};
