//! Neighborhood boundaries from an H_Index map: a moving threshold selects
//! homogeneous cells, 4-connected groups of acceptable size become
//! neighborhoods and leave the pool, and the threshold rises until nothing
//! is left to accept.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{convex_hull, CellIndex, CityGrid, PlanarPoint, Polygon};
use crate::homogeneity::HIndexMap;
use crate::ingest::CityDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    #[serde(default = "default_min")]
    pub min: usize,
    #[serde(default = "default_max")]
    pub max: usize,
    #[serde(default = "default_increment")]
    pub increment: f64,
    /// Accept `min <= size <= max` instead of `min < size < max`.
    #[serde(default)]
    pub inclusive: bool,
}

fn default_min() -> usize {
    8
}

fn default_max() -> usize {
    160
}

fn default_increment() -> f64 {
    0.02
}

impl Default for BoundaryParams {
    fn default() -> Self {
        BoundaryParams {
            min: default_min(),
            max: default_max(),
            increment: default_increment(),
            inclusive: false,
        }
    }
}

impl BoundaryParams {
    pub fn validate(&self) -> Result<()> {
        if self.min == 0 || self.min > self.max {
            return Err(Error::Config(format!(
                "size window must satisfy 0 < min <= max, got {}..{}",
                self.min, self.max
            )));
        }
        if !(self.increment.is_finite() && self.increment > 0.0) {
            return Err(Error::Config(format!("increment must be positive, got {}", self.increment)));
        }
        Ok(())
    }

    pub fn accepts(&self, size: usize) -> bool {
        if self.inclusive {
            self.min <= size && size <= self.max
        } else {
            self.min < size && size < self.max
        }
    }
}

/// Named H_Index radius presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Profile {
    #[default]
    #[serde(rename = "hoodsquare-s")]
    HoodsquareS,
    #[serde(rename = "hoodsquare-l")]
    HoodsquareL,
}

impl Profile {
    pub fn radius_m(self) -> f64 {
        match self {
            Profile::HoodsquareS => 400.0,
            Profile::HoodsquareL => 800.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::HoodsquareS => "hoodsquare-s",
            Profile::HoodsquareL => "hoodsquare-l",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "hoodsquare-s" | "s" => Ok(Profile::HoodsquareS),
            "hoodsquare-l" | "l" => Ok(Profile::HoodsquareL),
            _ => Err(Error::Config(format!("unknown profile `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub id: u32,
    /// Member cells in row-major order.
    pub cells: Vec<CellIndex>,
    /// Threshold at which the group was accepted.
    pub threshold: f64,
    /// Convex hull of the member cells' corners, in projected meters.
    pub polygon: Polygon,
    pub area_km2: f64,
}

impl Neighborhood {
    pub fn contains_cell(&self, cell: CellIndex) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResult {
    pub neighborhoods: Vec<Neighborhood>,
    /// Cells never assigned, row-major.
    pub residual: Vec<CellIndex>,
    /// Threshold value at which the loop stopped.
    pub final_threshold: f64,
}

const STEPS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Maximal 4-connected components, each sorted, ordered by smallest member.
pub fn connected_groups(cells: &[CellIndex]) -> Vec<Vec<CellIndex>> {
    if cells.is_empty() {
        return Vec::new();
    }
    let max_row = cells.iter().map(|c| c.row).max().unwrap() as usize + 1;
    let max_col = cells.iter().map(|c| c.col).max().unwrap() as usize + 1;
    if max_row.saturating_mul(max_col) <= 4 * cells.len() + 1024 {
        let mut mask = vec![false; max_row * max_col];
        for c in cells {
            mask[c.row as usize * max_col + c.col as usize] = true;
        }
        groups_in_mask(&mut mask, max_row, max_col)
    } else {
        // sparse input spread over a large extent
        let set: std::collections::BTreeSet<CellIndex> = cells.iter().copied().collect();
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for &start in &set {
            if !seen.insert(start) {
                continue;
            }
            let mut group = vec![start];
            let mut stack = vec![start];
            while let Some(c) = stack.pop() {
                for (dr, dc) in STEPS {
                    let (r, k) = (c.row as i64 + dr, c.col as i64 + dc);
                    if r < 0 || k < 0 {
                        continue;
                    }
                    let n = CellIndex::new(r as u32, k as u32);
                    if set.contains(&n) && seen.insert(n) {
                        group.push(n);
                        stack.push(n);
                    }
                }
            }
            group.sort_unstable();
            out.push(group);
        }
        out
    }
}

/// Depth-first components of the set cells of a row-major mask; clears the
/// mask as it goes.
fn groups_in_mask(mask: &mut [bool], rows: usize, cols: usize) -> Vec<Vec<CellIndex>> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] {
            continue;
        }
        mask[start] = false;
        stack.push(start);
        let mut group = Vec::new();
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            group.push(CellIndex::new(r as u32, c as u32));
            for (dr, dc) in STEPS {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                    continue;
                }
                let j = nr as usize * cols + nc as usize;
                if mask[j] {
                    mask[j] = false;
                    stack.push(j);
                }
            }
        }
        group.sort_unstable();
        out.push(group);
    }
    out
}

/// Polygon covering a set of cells: hull of all their corners.
pub fn cells_polygon(cells: &[CellIndex], grid: &CityGrid) -> Result<Polygon> {
    let corners: Vec<PlanarPoint> = cells.iter().flat_map(|&c| grid.cell_corners(c)).collect();
    convex_hull(&corners)
}

/// The moving-threshold boundary search.
///
/// At each threshold `t` (0, then repeatedly `t += increment`), unassigned
/// cells with `H > t` are grouped by 4-connectivity; groups inside the size
/// window become neighborhoods. The search ends when every cell is assigned
/// or `t` exceeds the map maximum by more than one increment.
pub fn find_boundaries(map: &HIndexMap, grid: &CityGrid, params: &BoundaryParams) -> Result<BoundaryResult> {
    params.validate()?;
    if map.n_rows != grid.n_rows || map.n_cols != grid.n_cols {
        return Err(Error::Data(format!(
            "H_Index map is {}x{} but the grid is {}x{}",
            map.n_rows, map.n_cols, grid.n_rows, grid.n_cols
        )));
    }
    let (rows, cols) = (map.n_rows as usize, map.n_cols as usize);
    let h = &map.values;
    let limit = map.max() + params.increment;
    let mut pool = vec![true; h.len()];
    let mut remaining = h.len();
    let mut threshold = 0.0;
    let mut neighborhoods = Vec::new();
    let mut mask = vec![false; h.len()];

    while remaining > 0 && threshold <= limit {
        let mut lowest_selected = f64::INFINITY;
        for i in 0..h.len() {
            mask[i] = pool[i] && h[i] > threshold;
            if mask[i] {
                lowest_selected = lowest_selected.min(h[i]);
            }
        }
        let mut accepted = false;
        for group in groups_in_mask(&mut mask, rows, cols) {
            if !params.accepts(group.len()) {
                continue;
            }
            for c in &group {
                pool[c.row as usize * cols + c.col as usize] = false;
            }
            remaining -= group.len();
            accepted = true;
            let polygon = cells_polygon(&group, grid)?;
            neighborhoods.push(Neighborhood {
                id: neighborhoods.len() as u32,
                area_km2: group.len() as f64 * grid.cell_area_km2(),
                cells: group,
                threshold,
                polygon,
            });
        }
        threshold += params.increment;
        if !accepted {
            // the selection cannot change until the threshold reaches the
            // lowest selected value, so those iterations are skipped
            while threshold < lowest_selected && threshold <= limit {
                threshold += params.increment;
            }
        }
    }

    let residual = (0..h.len())
        .filter(|&i| pool[i])
        .map(|i| CellIndex::new((i / cols) as u32, (i % cols) as u32))
        .collect();
    Ok(BoundaryResult {
        neighborhoods,
        residual,
        final_threshold: threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub category_id: String,
    pub name: String,
    pub count: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodStats {
    pub neighborhood_id: u32,
    pub venue_count: usize,
    /// Descending by share, ties in taxonomy order.
    pub ranking: Vec<CategoryShare>,
}

/// Venue category shares inside a neighborhood polygon. Each venue counts
/// once, under its own category.
pub fn neighborhood_stats(n: &Neighborhood, dataset: &CityDataset, venue_points: &[PlanarPoint]) -> NeighborhoodStats {
    let tax = &dataset.taxonomy;
    let mut counts = vec![0usize; tax.len()];
    let mut total = 0;
    for (cat, p) in dataset.venue_categories().into_iter().zip(venue_points) {
        if n.polygon.contains(p) {
            counts[cat] += 1;
            total += 1;
        }
    }
    let mut ranking: Vec<(usize, usize)> = counts.into_iter().enumerate().filter(|&(_, c)| c > 0).collect();
    ranking.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    NeighborhoodStats {
        neighborhood_id: n.id,
        venue_count: total,
        ranking: ranking
            .into_iter()
            .map(|(i, c)| {
                let node = tax.node(i);
                CategoryShare {
                    category_id: node.id.clone(),
                    name: node.name.clone(),
                    count: c,
                    share: c as f64 / total as f64,
                }
            })
            .collect(),
    }
}

/// `cells.csv`: `neighborhood_id,row,col`.
pub fn cells_csv(neighborhoods: &[Neighborhood]) -> String {
    let mut out = String::from("neighborhood_id,row,col\n");
    for n in neighborhoods {
        for c in &n.cells {
            writeln!(out, "{},{},{}", n.id, c.row, c.col).unwrap();
        }
    }
    out
}
