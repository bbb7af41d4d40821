use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::similarity::{norm, similarity_with_norms, SimilarityMeasure};
use crate::error::{Error, Result};
use crate::geo::{CellIndex, CityGrid};
use crate::hotspots::CellVectorField;

/// Radius used when none is configured, in meters.
pub const DEFAULT_RADIUS_M: f64 = 400.0;

// Absorbs rounding in `cell_size * sqrt(i^2 + j^2)` for exact lattice radii.
const RADIUS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide the weighted sum by the neighbor count.
    CountNormalized,
    /// Divide the weighted sum by the total weight.
    #[default]
    WeightNormalized,
}

impl Normalization {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "count_normalized" | "count" => Ok(Normalization::CountNormalized),
            "weight_normalized" | "normalized" => Ok(Normalization::WeightNormalized),
            _ => Err(Error::Config(format!("unknown normalization `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HIndexParams {
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    #[serde(default)]
    pub measure: SimilarityMeasure,
    #[serde(default)]
    pub normalization: Normalization,
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS_M
}

impl Default for HIndexParams {
    fn default() -> Self {
        HIndexParams {
            radius_m: DEFAULT_RADIUS_M,
            measure: SimilarityMeasure::default(),
            normalization: Normalization::default(),
        }
    }
}

impl HIndexParams {
    /// Gaussian width: half the radius.
    pub fn sigma(&self) -> f64 {
        self.radius_m / 2.0
    }

    pub fn weight(&self, distance: f64) -> f64 {
        let s = self.sigma();
        (-(distance * distance) / (2.0 * s * s)).exp()
    }
}

/// Cell offsets within the radius (the cell itself excluded) and their
/// Gaussian weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub offsets: Vec<(i64, i64, f64)>,
}

impl Stencil {
    pub fn new(cell_size: f64, params: &HIndexParams) -> Self {
        let reach = (params.radius_m / cell_size).floor() as i64;
        let mut offsets = Vec::new();
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let d = cell_size * ((dr * dr + dc * dc) as f64).sqrt();
                if d <= params.radius_m * (1.0 + RADIUS_SLACK) {
                    offsets.push((dr, dc, params.weight(d)));
                }
            }
        }
        Stencil { offsets }
    }
}

/// Cells whose centers lie within `radius_m` of `cell`'s center, excluding
/// `cell`, in row-major order.
pub fn neighbors(cell: CellIndex, radius_m: f64, grid: &CityGrid) -> Vec<CellIndex> {
    let params = HIndexParams {
        radius_m,
        ..HIndexParams::default()
    };
    Stencil::new(grid.cell_size, &params)
        .offsets
        .iter()
        .filter_map(|&(dr, dc, _)| offset(grid.n_rows, grid.n_cols, cell, dr, dc))
        .collect()
}

fn offset(n_rows: u32, n_cols: u32, cell: CellIndex, dr: i64, dc: i64) -> Option<CellIndex> {
    let r = cell.row as i64 + dr;
    let c = cell.col as i64 + dc;
    (r >= 0 && c >= 0 && r < n_rows as i64 && c < n_cols as i64).then(|| CellIndex::new(r as u32, c as u32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HIndexMap {
    pub radius_m: f64,
    pub measure: SimilarityMeasure,
    pub normalization: Normalization,
    pub n_rows: u32,
    pub n_cols: u32,
    /// Row-major values.
    pub values: Vec<f64>,
}

impl HIndexMap {
    pub fn from_values(n_rows: u32, n_cols: u32, values: Vec<f64>, params: &HIndexParams) -> Self {
        assert_eq!(values.len(), n_rows as usize * n_cols as usize);
        HIndexMap {
            radius_m: params.radius_m,
            measure: params.measure,
            normalization: params.normalization,
            n_rows,
            n_cols,
            values,
        }
    }

    pub fn get(&self, cell: CellIndex) -> f64 {
        self.values[cell.row as usize * self.n_cols as usize + cell.col as usize]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellIndex, f64)> + '_ {
        let cols = self.n_cols as usize;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (CellIndex::new((i / cols) as u32, (i % cols) as u32), v))
    }
}

struct Prepared<'a> {
    field: &'a CellVectorField,
    norms: Vec<f64>,
    stencil: Stencil,
    params: HIndexParams,
}

impl Prepared<'_> {
    fn value(&self, cell: CellIndex) -> f64 {
        let f = self.field;
        let idx = |c: CellIndex| c.row as usize * f.n_cols as usize + c.col as usize;
        let p = idx(cell);
        let (mut acc, mut wsum, mut count) = (0.0, 0.0, 0usize);
        for &(dr, dc, w) in &self.stencil.offsets {
            let Some(n) = offset(f.n_rows, f.n_cols, cell, dr, dc) else { continue };
            let q = idx(n);
            let sim = similarity_with_norms(&f.vectors[p], self.norms[p], &f.vectors[q], self.norms[q], self.params.measure);
            acc += sim * w;
            wsum += w;
            count += 1;
        }
        if count == 0 {
            return 0.0;
        }
        match self.params.normalization {
            Normalization::CountNormalized => acc / count as f64,
            Normalization::WeightNormalized => acc / wsum,
        }
    }
}

fn prepare<'a>(field: &'a CellVectorField, cell_size: f64, params: &HIndexParams) -> Result<Prepared<'a>> {
    if !(params.radius_m >= cell_size) {
        return Err(Error::Config(format!(
            "radius {} m is smaller than the cell size {cell_size} m",
            params.radius_m
        )));
    }
    Ok(Prepared {
        field,
        norms: field.vectors.iter().map(norm).collect(),
        stencil: Stencil::new(cell_size, params),
        params: *params,
    })
}

/// Homogeneity of one cell: Gaussian-weighted mean similarity to the cells
/// around it.
pub fn h_index(cell: CellIndex, field: &CellVectorField, grid: &CityGrid, params: &HIndexParams) -> Result<f64> {
    Ok(prepare(field, grid.cell_size, params)?.value(cell))
}

pub fn h_index_map(field: &CellVectorField, grid: &CityGrid, params: &HIndexParams) -> Result<HIndexMap> {
    let prep = prepare(field, grid.cell_size, params)?;
    let cols = field.n_cols as usize;
    let values: Vec<f64> = (0..field.vectors.len())
        .into_par_iter()
        .map(|i| prep.value(CellIndex::new((i / cols) as u32, (i % cols) as u32)))
        .collect();
    Ok(HIndexMap::from_values(field.n_rows, field.n_cols, values, params))
}
