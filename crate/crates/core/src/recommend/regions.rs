use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::boundaries::Neighborhood;
use crate::error::{Error, Result};
use crate::geo::{ring_contains, CellIndex, CityGrid, GeoPoint, PlanarPoint};

/// Width of the uniform-grid comparison squares, in meters.
pub const GRID_BASELINE_WIDTH_M: f64 = 800.0;

/// One candidate area for recommendation, as a set of grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: u32,
    /// Row-major.
    pub cells: Vec<CellIndex>,
    pub area_km2: f64,
}

/// A labeled partition (or partial cover) of the city into regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySet {
    pub label: String,
    pub regions: Vec<Region>,
}

impl BoundarySet {
    pub fn from_neighborhoods(label: &str, neighborhoods: &[Neighborhood]) -> Self {
        BoundarySet {
            label: label.to_string(),
            regions: neighborhoods
                .iter()
                .map(|n| Region {
                    id: n.id,
                    cells: n.cells.clone(),
                    area_km2: n.area_km2,
                })
                .collect(),
        }
    }

    /// Tiles the grid into squares of `width_m`, truncated at the edges.
    pub fn grid_baseline(grid: &CityGrid, width_m: f64) -> Result<Self> {
        let k = (width_m / grid.cell_size).round() as u32;
        if k == 0 {
            return Err(Error::Config(format!(
                "baseline width {width_m} m is below the cell size {} m",
                grid.cell_size
            )));
        }
        let mut regions = Vec::new();
        for br in (0..grid.n_rows).step_by(k as usize) {
            for bc in (0..grid.n_cols).step_by(k as usize) {
                let mut cells = Vec::new();
                for r in br..(br + k).min(grid.n_rows) {
                    for c in bc..(bc + k).min(grid.n_cols) {
                        cells.push(CellIndex::new(r, c));
                    }
                }
                regions.push(Region {
                    id: regions.len() as u32,
                    area_km2: cells.len() as f64 * grid.cell_area_km2(),
                    cells,
                });
            }
        }
        Ok(BoundarySet {
            label: format!("grid-{}", width_m.round() as u64),
            regions,
        })
    }

    /// Reads a GeoJSON FeatureCollection of Polygon/MultiPolygon features.
    /// A region takes the cells whose centers fall inside its geometry;
    /// features covering no cell are skipped. Region ids follow feature order.
    pub fn from_geojson(label: &str, text: &str, grid: &CityGrid) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Data(format!("boundary GeoJSON: {e}")))?;
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Data("boundary GeoJSON has no `features` array".into()))?;
        let mut regions = Vec::new();
        for (fi, f) in features.iter().enumerate() {
            let geom = f
                .get("geometry")
                .ok_or_else(|| Error::Data(format!("feature {fi} has no geometry")))?;
            let polygons = polygons_of(geom, grid).map_err(|m| Error::Data(format!("feature {fi}: {m}")))?;
            let cells: Vec<CellIndex> = grid
                .cells()
                .filter(|&c| {
                    let p = grid.cell_center(c);
                    polygons.iter().any(|rings| {
                        ring_contains(&rings[0], &p) && !rings[1..].iter().any(|h| ring_contains(h, &p))
                    })
                })
                .collect();
            if cells.is_empty() {
                continue;
            }
            regions.push(Region {
                id: regions.len() as u32,
                area_km2: cells.len() as f64 * grid.cell_area_km2(),
                cells,
            });
        }
        Ok(BoundarySet {
            label: label.to_string(),
            regions,
        })
    }

    /// Region covering each cell (row-major); the lowest id wins overlaps.
    pub fn cell_lookup(&self, grid: &CityGrid) -> Vec<Option<u32>> {
        let mut out = vec![None; grid.len()];
        for r in self.regions.iter().rev() {
            for &c in &r.cells {
                if grid.contains_cell(c.row as i64, c.col as i64) {
                    out[grid.linear(c)] = Some(r.id);
                }
            }
        }
        out
    }

    pub fn area_of(&self, id: u32) -> Option<f64> {
        self.regions.iter().find(|r| r.id == id).map(|r| r.area_km2)
    }
}

type Rings = Vec<Vec<PlanarPoint>>;

fn polygons_of(geom: &Value, grid: &CityGrid) -> std::result::Result<Vec<Rings>, String> {
    let kind = geom.get("type").and_then(Value::as_str).ok_or("geometry without type")?;
    let coords = geom.get("coordinates").ok_or("geometry without coordinates")?;
    match kind {
        "Polygon" => Ok(vec![rings_of(coords, grid)?]),
        "MultiPolygon" => coords
            .as_array()
            .ok_or("MultiPolygon coordinates must be an array")?
            .iter()
            .map(|p| rings_of(p, grid))
            .collect(),
        other => Err(format!("unsupported geometry type {other}")),
    }
}

fn rings_of(coords: &Value, grid: &CityGrid) -> std::result::Result<Rings, String> {
    let rings = coords.as_array().ok_or("polygon coordinates must be an array")?;
    if rings.is_empty() {
        return Err("polygon without rings".into());
    }
    rings
        .iter()
        .map(|ring| {
            let pts = ring.as_array().ok_or("ring must be an array")?;
            pts.iter()
                .map(|pos| {
                    let lon = pos.get(0).and_then(Value::as_f64).ok_or("bad position")?;
                    let lat = pos.get(1).and_then(Value::as_f64).ok_or("bad position")?;
                    let g = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
                    grid.project(&g).map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect()
}
