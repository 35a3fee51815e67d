use serde::{Deserialize, Serialize};

use super::MetricsReport;

/// The per-snapshot numbers a run summary folds over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotExtent {
    pub diameter: u32,
    pub radius: u32,
    /// Largest per-node eccentricity; equals the diameter.
    pub max_eccentricity: u32,
    pub mean_eccentricity: f64,
}

impl From<&MetricsReport> for SnapshotExtent {
    fn from(r: &MetricsReport) -> Self {
        Self {
            diameter: r.diameter,
            radius: r.radius,
            max_eccentricity: r.eccentricity.iter().copied().max().unwrap_or(0),
            mean_eccentricity: r.mean_eccentricity(),
        }
    }
}

/// One row of the per-run summary table.
///
/// `mean_ecc` averages each snapshot's largest eccentricity, which is why it
/// always equals `mean_diameter`. `mean_node_ecc` is the per-node average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub snapshots: usize,
    pub mean_ecc: f64,
    pub max_ecc: u32,
    pub mean_diameter: f64,
    pub mean_radius: f64,
    pub min_radius: u32,
    pub mean_node_ecc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("cannot summarize a run with no snapshots")]
pub struct EmptyRun;

pub fn summarize_run(snapshots: &[SnapshotExtent]) -> Result<RunSummary, EmptyRun> {
    if snapshots.is_empty() {
        return Err(EmptyRun);
    }
    let n = snapshots.len() as f64;
    let mean = |f: &dyn Fn(&SnapshotExtent) -> f64| snapshots.iter().map(f).sum::<f64>() / n;
    Ok(RunSummary {
        snapshots: snapshots.len(),
        mean_ecc: mean(&|s| s.max_eccentricity as f64),
        max_ecc: snapshots.iter().map(|s| s.max_eccentricity).max().unwrap_or(0),
        mean_diameter: mean(&|s| s.diameter as f64),
        mean_radius: mean(&|s| s.radius as f64),
        min_radius: snapshots.iter().map(|s| s.radius).min().unwrap_or(0),
        mean_node_ecc: mean(&|s| s.mean_eccentricity),
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::path;
    use super::super::MetricsOptions;
    use super::*;

    fn extent(d: u32, r: u32) -> SnapshotExtent {
        SnapshotExtent {
            diameter: d,
            radius: r,
            max_eccentricity: d,
            mean_eccentricity: (d + r) as f64 / 2.0,
        }
    }

    #[test]
    fn single_path_snapshot() {
        let r = MetricsReport::compute(&path(4), &MetricsOptions::default()).unwrap();
        let s = summarize_run(&[SnapshotExtent::from(&r)]).unwrap();
        assert_eq!(s.mean_diameter, 3.0);
        assert_eq!(s.mean_radius, 2.0);
        assert_eq!(s.mean_ecc, s.mean_diameter);
        assert_eq!(s.mean_node_ecc, 2.5);
    }

    #[test]
    fn averages_over_snapshots() {
        let s = summarize_run(&[extent(3, 2), extent(5, 3)]).unwrap();
        assert_eq!(s.mean_diameter, 4.0);
        assert_eq!(s.max_ecc, 5);
        assert_eq!(s.min_radius, 2);
        assert_eq!(s.mean_radius, 2.5);
    }

    #[test]
    fn empty_run() {
        assert_eq!(summarize_run(&[]), Err(EmptyRun));
    }
}
