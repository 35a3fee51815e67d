use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::graph::{summarize_run, ActuatorGraph, Edge, SnapshotExtent};
use crate::tessellation::snapshot_geojson;
use crate::time::Timestamp;
use crate::tle::OrbitRegime;

use super::{
    snapshot_from_graph, NodeRow, SimulationError, SnapshotOptions, SummaryRow, TimeSeriesRecord,
};

pub const NODES_HEADER: &str = "timestamp,fraction_pct,norad_id,name,regime,latitude_deg,longitude_deg,altitude_km,degree,eccentricity,closeness,coreness";
pub const GLOBALS_HEADER: &str = "timestamp,fraction_pct,node_count,edge_count,diameter,radius,avg_path_length,degree_mean,degree_variance,mst_total_km";
pub const EDGES_HEADER: &str = "timestamp,fraction_pct,norad_a,norad_b,great_circle_km,chord_km,in_mst";
pub const SUMMARY_HEADER: &str = "regime,fraction_pct,mean_ecc,max_ecc,mean_diameter,mean_radius,min_radius";
pub const ALIASES_HEADER: &str = "timestamp,fraction_pct,norad_id,representative_id";
const INVALID_HEADER: &str = "timestamp,fraction_pct,reason";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimulationError + '_ {
    move |source| SimulationError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> SimulationError + '_ {
    move |source| SimulationError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl Table {
    fn create(path: PathBuf, header: &str) -> Result<Self, SimulationError> {
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(file));
        writer.write_record(header.split(',')).map_err(csv_err(&path))?;
        Ok(Self { path, writer })
    }

    fn row(&mut self, fields: &[String]) -> Result<(), SimulationError> {
        self.writer.write_record(fields).map_err(csv_err(&self.path))
    }

    fn finish(mut self) -> Result<PathBuf, SimulationError> {
        self.writer.flush().map_err(io_err(&self.path))?;
        Ok(self.path)
    }
}

fn prefix(r: &TimeSeriesRecord) -> [String; 2] {
    [r.timestamp.to_iso8601(), r.fraction_pct.to_string()]
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<(), SimulationError> {
    let mut table = Table::create(path.to_path_buf(), SUMMARY_HEADER)?;
    for row in rows {
        let s = &row.summary;
        table.row(&[
            row.regime.to_string(),
            row.fraction_pct.to_string(),
            s.mean_ecc.to_string(),
            s.max_ecc.to_string(),
            s.mean_diameter.to_string(),
            s.mean_radius.to_string(),
            s.min_radius.to_string(),
        ])?;
    }
    table.finish()?;
    Ok(())
}

/// Writes nodes, globals, edges and summary tables into `dir`, plus
/// aliases.csv, invalid_snapshots.csv and consensus.jsonl when they have
/// content. Rows are ordered by fraction, then timestamp.
pub fn export_csv(
    records: &[TimeSeriesRecord],
    summaries: &[SummaryRow],
    dir: &Path,
) -> Result<Vec<PathBuf>, SimulationError> {
    if records.is_empty() {
        return Err(SimulationError::EmptyRecords);
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut order: Vec<&TimeSeriesRecord> = records.iter().collect();
    order.sort_by(|a, b| {
        a.fraction_pct
            .total_cmp(&b.fraction_pct)
            .then(a.timestamp.cmp(&b.timestamp))
    });

    let mut nodes = Table::create(dir.join("nodes.csv"), NODES_HEADER)?;
    let mut globals = Table::create(dir.join("globals.csv"), GLOBALS_HEADER)?;
    let mut edges = Table::create(dir.join("edges.csv"), EDGES_HEADER)?;
    let mut aliases: Option<Table> = None;
    let mut invalid: Option<Table> = None;
    let mut transcripts: Vec<String> = Vec::new();

    for r in &order {
        let [ts, frac] = prefix(r);
        for n in &r.nodes {
            nodes.row(&[
                ts.clone(),
                frac.clone(),
                n.norad_id.to_string(),
                n.name.clone(),
                n.regime.to_string(),
                n.latitude_deg.to_string(),
                n.longitude_deg.to_string(),
                n.altitude_km.to_string(),
                n.degree.to_string(),
                n.eccentricity.to_string(),
                n.closeness.to_string(),
                n.coreness.to_string(),
            ])?;
        }
        if let Some(g) = &r.global {
            globals.row(&[
                ts.clone(),
                frac.clone(),
                g.node_count.to_string(),
                g.edge_count.to_string(),
                g.diameter.to_string(),
                g.radius.to_string(),
                g.avg_path_length.to_string(),
                g.degree_mean.to_string(),
                g.degree_variance.to_string(),
                g.mst_total_km.to_string(),
            ])?;
        }
        for e in &r.edges {
            edges.row(&[
                ts.clone(),
                frac.clone(),
                e.norad_a.to_string(),
                e.norad_b.to_string(),
                e.great_circle_km.to_string(),
                e.chord_km.to_string(),
                e.in_mst.to_string(),
            ])?;
        }
        for a in &r.aliases {
            if aliases.is_none() {
                aliases = Some(Table::create(dir.join("aliases.csv"), ALIASES_HEADER)?);
            }
            aliases.as_mut().expect("created above").row(&[
                ts.clone(),
                frac.clone(),
                a.actuator_id.to_string(),
                a.representative_id.to_string(),
            ])?;
        }
        if let Some(why) = &r.invalid {
            if invalid.is_none() {
                invalid = Some(Table::create(dir.join("invalid_snapshots.csv"), INVALID_HEADER)?);
            }
            invalid
                .as_mut()
                .expect("created above")
                .row(&[ts.clone(), frac.clone(), why.clone()])?;
        }
        if let Some(t) = &r.consensus {
            transcripts.push(t.to_json_line());
        }
    }

    let mut written = vec![nodes.finish()?, globals.finish()?, edges.finish()?];
    let summary_path = dir.join("summary.csv");
    write_summary_csv(summaries, &summary_path)?;
    written.push(summary_path);
    written.extend(aliases.map(Table::finish).transpose()?);
    written.extend(invalid.map(Table::finish).transpose()?);
    if !transcripts.is_empty() {
        let path = dir.join("consensus.jsonl");
        let mut text = transcripts.join("\n");
        text.push('\n');
        std::fs::write(&path, text).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Voronoi cells and Delaunay edges of one snapshot. The record must have
/// been built with geometry retained.
pub fn export_geojson(record: &TimeSeriesRecord, path: &Path) -> Result<(), SimulationError> {
    let (tri, voronoi) = record
        .geometry
        .as_deref()
        .ok_or_else(|| SimulationError::Input {
            path: path.to_path_buf(),
            message: "snapshot has no retained geometry".into(),
        })?;
    let collection = snapshot_geojson(tri, voronoi);
    std::fs::write(path, collection.to_string()).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct NodeCsvRow {
    pub timestamp: String,
    pub fraction_pct: f64,
    pub norad_id: u32,
    pub name: String,
    pub regime: String,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_km: f64,
    pub degree: usize,
    pub eccentricity: u32,
    pub closeness: f64,
    pub coreness: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EdgeCsvRow {
    pub timestamp: String,
    pub fraction_pct: f64,
    pub norad_a: u32,
    pub norad_b: u32,
    pub great_circle_km: f64,
    pub chord_km: f64,
    pub in_mst: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct GlobalCsvRow {
    pub timestamp: String,
    pub fraction_pct: f64,
    pub node_count: usize,
    pub edge_count: usize,
    pub diameter: u32,
    pub radius: u32,
    pub avg_path_length: f64,
    pub degree_mean: f64,
    pub degree_variance: f64,
    pub mst_total_km: f64,
}

fn read_table<T: DeserializeOwned>(path: &Path, header: &str) -> Result<Vec<T>, SimulationError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found = reader.headers().map_err(csv_err(path))?;
    if found.iter().collect::<Vec<_>>().join(",") != header {
        return Err(SimulationError::Input {
            path: path.to_path_buf(),
            message: format!("expected header `{header}`"),
        });
    }
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(csv_err(path))
}

pub fn read_nodes_csv(path: &Path) -> Result<Vec<NodeCsvRow>, SimulationError> {
    read_table(path, NODES_HEADER)
}

pub fn read_edges_csv(path: &Path) -> Result<Vec<EdgeCsvRow>, SimulationError> {
    read_table(path, EDGES_HEADER)
}

pub fn read_globals_csv(path: &Path) -> Result<Vec<GlobalCsvRow>, SimulationError> {
    read_table(path, GLOBALS_HEADER)
}

fn parse_time(path: &Path, text: &str) -> Result<Timestamp, SimulationError> {
    Timestamp::parse_iso8601(text).map_err(|e| SimulationError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

type SnapshotKey = (Timestamp, u64);

fn key(t: Timestamp, fraction: f64) -> SnapshotKey {
    (t, fraction.to_bits())
}

/// Rebuilds every snapshot in a nodes/edges CSV pair and recomputes its
/// metrics. Edge weights are taken from the file.
pub fn records_from_csv(
    nodes_path: &Path,
    edges_path: &Path,
    options: &SnapshotOptions,
) -> Result<Vec<TimeSeriesRecord>, SimulationError> {
    let mut snapshots: BTreeMap<SnapshotKey, (Vec<NodeRow>, Vec<EdgeCsvRow>)> = BTreeMap::new();
    for row in read_nodes_csv(nodes_path)? {
        let t = parse_time(nodes_path, &row.timestamp)?;
        let regime: OrbitRegime = row.regime.parse().map_err(|_| SimulationError::Input {
            path: nodes_path.to_path_buf(),
            message: format!("unknown regime `{}`", row.regime),
        })?;
        snapshots
            .entry(key(t, row.fraction_pct))
            .or_default()
            .0
            .push(NodeRow {
                norad_id: row.norad_id,
                name: row.name,
                regime,
                latitude_deg: row.latitude_deg,
                longitude_deg: row.longitude_deg,
                altitude_km: row.altitude_km,
                degree: row.degree,
                eccentricity: row.eccentricity,
                closeness: row.closeness,
                coreness: row.coreness,
            });
    }
    for row in read_edges_csv(edges_path)? {
        let t = parse_time(edges_path, &row.timestamp)?;
        match snapshots.get_mut(&key(t, row.fraction_pct)) {
            Some(s) => s.1.push(row),
            None => {
                return Err(SimulationError::Input {
                    path: edges_path.to_path_buf(),
                    message: format!("edge row for {} at {}% has no nodes", row.timestamp, row.fraction_pct),
                })
            }
        }
    }

    let mut records = Vec::with_capacity(snapshots.len());
    for ((t, fraction_bits), (nodes, edges)) in snapshots {
        let fraction = f64::from_bits(fraction_bits);
        let ids: Vec<u32> = nodes.iter().map(|n| n.norad_id).collect();
        let index: HashMap<u32, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut graph_edges = Vec::with_capacity(edges.len());
        for e in &edges {
            let (Some(&a), Some(&b)) = (index.get(&e.norad_a), index.get(&e.norad_b)) else {
                return Err(SimulationError::Input {
                    path: edges_path.to_path_buf(),
                    message: format!("edge {}-{} names an unknown node", e.norad_a, e.norad_b),
                });
            };
            graph_edges.push(Edge {
                a,
                b,
                great_circle_km: e.great_circle_km,
                chord_km: e.chord_km,
            });
        }
        let g = ActuatorGraph::from_edges(ids, graph_edges).map_err(|err| SimulationError::Input {
            path: edges_path.to_path_buf(),
            message: err.to_string(),
        })?;
        let regime = nodes[0].regime;
        let info: HashMap<u32, NodeRow> = nodes.into_iter().map(|n| (n.norad_id, n)).collect();
        records.push(snapshot_from_graph(&g, &info, t, fraction, regime, options));
    }
    records.sort_by(|a, b| {
        a.fraction_pct
            .total_cmp(&b.fraction_pct)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    Ok(records)
}

/// Folds globals.csv rows into one summary row per fraction. The per-node
/// mean eccentricity is not in globals.csv and comes out as NaN.
pub fn summaries_from_globals(rows: &[GlobalCsvRow], regime: OrbitRegime) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<u64, Vec<SnapshotExtent>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.fraction_pct.to_bits()).or_default().push(SnapshotExtent {
            diameter: r.diameter,
            radius: r.radius,
            max_eccentricity: r.diameter,
            mean_eccentricity: f64::NAN,
        });
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .filter_map(|(bits, extents)| {
            summarize_run(&extents).ok().map(|summary| SummaryRow {
                regime,
                fraction_pct: f64::from_bits(bits),
                summary,
            })
        })
        .collect();
    out.sort_by(|a, b| a.fraction_pct.total_cmp(&b.fraction_pct));
    out
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::leo_catalog;
    use super::super::*;
    use super::*;
    use crate::geometry::Vec3;
    use crate::propagation::{ActuatorState, EciState, GeodeticPoint};

    fn states_at(points: &[(f64, f64)]) -> Vec<ActuatorState> {
        points
            .iter()
            .enumerate()
            .map(|(i, &(lat, lon))| ActuatorState {
                norad_id: 100 + i as u32,
                name: format!("N{i}"),
                regime: OrbitRegime::Leo,
                eci: EciState {
                    position: Vec3::zero(),
                    velocity: Vec3::zero(),
                    epoch: Timestamp::from_millis(0),
                },
                geodetic: GeodeticPoint {
                    latitude_deg: lat,
                    longitude_deg: lon,
                    altitude_km: 500.0,
                },
                timestamp: Timestamp::from_millis(0),
            })
            .collect()
    }

    fn tetrahedron() -> Vec<ActuatorState> {
        let lat = -(1.0f64 / 3.0).asin().to_degrees();
        states_at(&[(90.0, 0.0), (lat, 0.0), (lat, 120.0), (lat, -120.0)])
    }

    fn octahedron() -> Vec<ActuatorState> {
        states_at(&[(90.0, 0.0), (-90.0, 0.0), (0.0, 0.0), (0.0, 90.0), (0.0, 180.0), (0.0, -90.0)])
    }

    fn snapshot(states: &[ActuatorState], keep_geometry: bool) -> TimeSeriesRecord {
        snapshot_from_states(
            states,
            Timestamp::from_millis(0),
            100.0,
            OrbitRegime::Leo,
            &SnapshotOptions {
                keep_geometry,
                ..Default::default()
            },
        )
    }

    fn line_count(path: &Path) -> usize {
        std::fs::read_to_string(path).unwrap().lines().count()
    }

    #[test]
    fn empty_records_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            export_csv(&[], &[], dir.path()),
            Err(SimulationError::EmptyRecords)
        ));
    }

    #[test]
    fn tetrahedron_tables() {
        let dir = tempfile::tempdir().unwrap();
        let r = snapshot(&tetrahedron(), false);
        let summaries = summarize_records(std::slice::from_ref(&r));
        let files = export_csv(&[r], &summaries, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        assert_eq!(line_count(&dir.path().join("nodes.csv")), 5);
        assert_eq!(line_count(&dir.path().join("edges.csv")), 7);
        assert_eq!(line_count(&dir.path().join("globals.csv")), 2);
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary, format!("{SUMMARY_HEADER}\nLEO,100,1,1,1,1,1\n"));
        let edges = std::fs::read_to_string(dir.path().join("edges.csv")).unwrap();
        assert_eq!(edges.lines().next().unwrap(), EDGES_HEADER);
        assert_eq!(edges.matches(",true").count(), 3);
    }

    #[test]
    fn octahedron_geojson() {
        let dir = tempfile::tempdir().unwrap();
        let r = snapshot(&octahedron(), true);
        let path = dir.path().join("snap.geojson");
        export_geojson(&r, &path).unwrap();
        let fc: geojson::FeatureCollection = std::fs::read_to_string(&path).unwrap().parse::<geojson::GeoJson>().unwrap().try_into().unwrap();
        let kind = |k: &str| {
            fc.features
                .iter()
                .filter(|f| f.property("kind").and_then(|v| v.as_str()) == Some(k))
                .count()
        };
        assert_eq!(kind("voronoi_cell"), 6);
        assert_eq!(kind("delaunay_edge"), 12);
    }

    #[test]
    fn geojson_needs_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let r = snapshot(&octahedron(), false);
        assert!(export_geojson(&r, &dir.path().join("x.geojson")).is_err());
    }

    #[test]
    fn aliases_written_when_present() {
        let dir = tempfile::tempdir().unwrap();
        let mut states = octahedron();
        let mut twin = states[2].clone();
        twin.norad_id = 999;
        states.push(twin);
        let r = snapshot(&states, false);
        assert_eq!(r.nodes.len(), 6);
        export_csv(&[r], &[], dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("aliases.csv")).unwrap();
        assert_eq!(text, format!("{ALIASES_HEADER}\n1970-01-01T00:00:00.000Z,100,999,102\n"));
    }

    #[test]
    fn invalid_snapshot_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let r = snapshot(&states_at(&[(0.0, 0.0), (0.0, 10.0), (0.0, 20.0), (0.0, 30.0)]), false);
        assert!(!r.is_valid());
        export_csv(&[r], &[], dir.path()).unwrap();
        assert_eq!(line_count(&dir.path().join("globals.csv")), 1);
        assert_eq!(line_count(&dir.path().join("invalid_snapshots.csv")), 2);
    }

    #[test]
    fn csv_round_trip_recomputes_same_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let config = SimulationConfig {
            fractions: vec![60.0, 100.0],
            duration_s: 1800,
            ..Default::default()
        };
        let out = run_simulation(&config, &leo_catalog(12)).unwrap();
        export_csv(&out.records, &out.summaries, dir.path()).unwrap();
        let again = records_from_csv(
            &dir.path().join("nodes.csv"),
            &dir.path().join("edges.csv"),
            &SnapshotOptions::default(),
        )
        .unwrap();
        assert_eq!(again.len(), out.records.len());
        for (a, b) in again.iter().zip(&out.records) {
            assert_eq!(a.timestamp, b.timestamp);
            assert_eq!(a.nodes, b.nodes);
            assert_eq!(a.edges, b.edges);
            assert_eq!(a.global, b.global);
        }
        let globals = read_globals_csv(&dir.path().join("globals.csv")).unwrap();
        let folded = summaries_from_globals(&globals, OrbitRegime::Leo);
        assert_eq!(folded.len(), 2);
        for (f, s) in folded.iter().zip(&out.summaries) {
            assert_eq!(f.fraction_pct, s.fraction_pct);
            assert_eq!(f.summary.mean_diameter, s.summary.mean_diameter);
            assert_eq!(f.summary.min_radius, s.summary.min_radius);
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_globals_csv(&path), Err(SimulationError::Input { .. })));
    }
}
