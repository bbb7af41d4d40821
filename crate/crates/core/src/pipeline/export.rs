//! GeoJSON (RFC 7946) views of the pipeline artifacts. Rings are closed,
//! counter-clockwise, and in unprojected `[lon, lat]`.

use serde_json::{json, Map, Value};

use crate::boundaries::{Neighborhood, NeighborhoodStats};
use crate::geo::{CityGrid, PlanarPoint, Polygon};
use crate::hotspots::Hotspot;
use crate::recommend::BoundarySet;

/// Category shares listed per neighborhood feature.
pub const TOP_FEATURES: usize = 5;

/// Closed exterior ring of a projected polygon.
pub fn ring(polygon: &Polygon, grid: &CityGrid) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = polygon
        .vertices()
        .iter()
        .map(|p| {
            let g = grid.unproject(p);
            [g.lon, g.lat]
        })
        .collect();
    if let Some(&first) = out.first() {
        out.push(first);
    }
    out
}

fn feature(ring: Vec<[f64; 2]>, properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": {"type": "Polygon", "coordinates": [ring]},
        "properties": properties,
    })
}

fn collection(features: Vec<Value>) -> Value {
    let mut m = Map::new();
    m.insert("type".into(), Value::from("FeatureCollection"));
    m.insert("features".into(), Value::Array(features));
    Value::Object(m)
}

pub fn hotspots_geojson(hotspots: &[Hotspot], grid: &CityGrid) -> Value {
    collection(
        hotspots
            .iter()
            .map(|h| {
                feature(
                    ring(&h.polygon, grid),
                    json!({
                        "feature_id": h.feature_id,
                        "feature_key": h.feature_key,
                        "density": h.density,
                        "member_count": h.member_count,
                    }),
                )
            })
            .collect(),
    )
}

/// `stats` is matched to neighborhoods by id.
pub fn neighborhoods_geojson(neighborhoods: &[Neighborhood], stats: &[NeighborhoodStats], grid: &CityGrid) -> Value {
    collection(
        neighborhoods
            .iter()
            .map(|n| {
                let top: Vec<Value> = stats
                    .iter()
                    .find(|s| s.neighborhood_id == n.id)
                    .map(|s| {
                        s.ranking
                            .iter()
                            .take(TOP_FEATURES)
                            .map(|c| json!({"category_id": c.category_id, "name": c.name, "share": c.share}))
                            .collect()
                    })
                    .unwrap_or_default();
                feature(
                    ring(&n.polygon, grid),
                    json!({
                        "id": n.id,
                        "cell_count": n.cells.len(),
                        "area_km2": n.area_km2,
                        "threshold": n.threshold,
                        "top_features": top,
                    }),
                )
            })
            .collect(),
    )
}

/// Each region as the rectangle spanning its cells.
pub fn baseline_geojson(set: &BoundarySet, grid: &CityGrid) -> Value {
    collection(
        set.regions
            .iter()
            .filter(|r| !r.cells.is_empty())
            .map(|r| {
                let (mut lo, mut hi) = (
                    PlanarPoint::new(f64::INFINITY, f64::INFINITY),
                    PlanarPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
                );
                for &c in &r.cells {
                    for p in grid.cell_corners(c) {
                        lo = PlanarPoint::new(lo.x.min(p.x), lo.y.min(p.y));
                        hi = PlanarPoint::new(hi.x.max(p.x), hi.y.max(p.y));
                    }
                }
                let rect = Polygon::rectangle(lo, hi).expect("cells have positive extent");
                feature(
                    ring(&rect, grid),
                    json!({"id": r.id, "cell_count": r.cells.len(), "area_km2": r.area_km2}),
                )
            })
            .collect(),
    )
}

pub fn to_bytes(value: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("json value serializes");
    out.push(b'\n');
    out
}
