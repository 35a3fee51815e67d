use geojson::{Feature, FeatureCollection, Geometry, JsonObject, Value};
use serde_json::json;

use super::{SphericalTriangulation, SphericalVoronoi};
use crate::geometry::{angular_distance, Vec3};

/// Great-circle arcs are sampled at least this finely (degrees).
pub const GEOJSON_MAX_ARC_STEP_DEG: f64 = 2.0;

/// Points along the minor arc from `a` to `b`, both ends included.
fn sample_arc(a: Vec3, b: Vec3) -> Vec<Vec3> {
    let angle = angular_distance(a, b);
    let steps = ((angle.to_degrees() / GEOJSON_MAX_ARC_STEP_DEG).ceil() as usize).max(1);
    let sin = angle.sin();
    (0..=steps)
        .map(|k| {
            let t = k as f64 / steps as f64;
            if sin < 1e-12 {
                return (a * (1.0 - t) + b * t).normalized().unwrap_or(a);
            }
            let wa = ((1.0 - t) * angle).sin() / sin;
            let wb = (t * angle).sin() / sin;
            a * wa + b * wb
        })
        .collect()
}

fn position(v: Vec3) -> Vec<f64> {
    let (lat, lon) = v.to_lat_lon_deg();
    vec![lon, lat]
}

fn feature(geometry: Value, properties: serde_json::Value) -> Feature {
    let properties: JsonObject = match properties {
        serde_json::Value::Object(map) => map,
        _ => unreachable!("properties are built as objects"),
    };
    Feature {
        bbox: None,
        geometry: Some(Geometry::new(geometry)),
        id: None,
        properties: Some(properties),
        foreign_members: None,
    }
}

/// Voronoi cells as polygons plus Delaunay edges as line strings, lon/lat degrees.
pub fn snapshot_geojson(tri: &SphericalTriangulation, voronoi: &SphericalVoronoi) -> FeatureCollection {
    let mut features = Vec::with_capacity(voronoi.cells.len() + tri.edges.len());
    for (seed, ring) in voronoi.cells.iter().enumerate() {
        let mut coords = Vec::new();
        for k in 0..ring.len() {
            let a = voronoi.vertices[ring[k]];
            let b = voronoi.vertices[ring[(k + 1) % ring.len()]];
            let arc = sample_arc(a, b);
            coords.extend(arc[..arc.len() - 1].iter().map(|&p| position(p)));
        }
        if let Some(first) = coords.first().cloned() {
            coords.push(first);
        }
        features.push(feature(
            Value::Polygon(vec![coords]),
            json!({
                "kind": "voronoi_cell",
                "norad_id": voronoi.seeds[seed].actuator_id,
            }),
        ));
    }
    for &(a, b) in &tri.edges {
        let line = sample_arc(tri.points[a].vector, tri.points[b].vector)
            .into_iter()
            .map(position)
            .collect();
        features.push(feature(
            Value::LineString(line),
            json!({
                "kind": "delaunay_edge",
                "norad_a": tri.points[a].actuator_id,
                "norad_b": tri.points[b].actuator_id,
            }),
        ));
    }
    FeatureCollection {
        bbox: None,
        features,
        foreign_members: None,
    }
}
