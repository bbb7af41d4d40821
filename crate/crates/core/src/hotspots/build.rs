use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::extract::{extract_clusters, ExtractParams};
use super::optics::{optics, OpticsParams};
use crate::error::Result;
use crate::features::FeatureCatalog;
use crate::geo::{convex_hull, CellIndex, CityGrid, PlanarPoint, Polygon};
use crate::ingest::CityDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotspotParams {
    #[serde(default = "default_min_pts")]
    pub min_pts: usize,
    /// OPTICS radius in meters; absent means unbounded.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "default_significance")]
    pub significance_ratio: f64,
}

fn default_min_pts() -> usize {
    5
}

fn default_significance() -> f64 {
    0.75
}

impl Default for HotspotParams {
    fn default() -> Self {
        HotspotParams {
            min_pts: default_min_pts(),
            eps: None,
            significance_ratio: default_significance(),
        }
    }
}

impl HotspotParams {
    pub fn optics(&self) -> OpticsParams {
        OpticsParams {
            min_pts: self.min_pts,
            eps: self.eps,
        }
    }

    pub fn extract(&self) -> ExtractParams {
        ExtractParams {
            significance_ratio: self.significance_ratio,
            min_cluster_size: self.min_pts,
            ..ExtractParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    /// Dimension in the feature catalog.
    pub feature_id: usize,
    pub feature_key: String,
    pub polygon: Polygon,
    pub member_count: usize,
    /// Members per km² of hull area.
    pub density: f64,
    /// Venue indices, ascending.
    pub members: Vec<u32>,
}

/// Projected locations of the city venues, in dataset order.
pub fn venue_points(dataset: &CityDataset, grid: &CityGrid) -> Result<Vec<PlanarPoint>> {
    dataset.venues.iter().map(|v| grid.project(&v.location)).collect()
}

/// Clusters one point set and hulls every sufficiently large cluster.
/// Returns `(members, polygon)` pairs with members as indices into `points`.
pub fn cluster_polygons(points: &[PlanarPoint], params: &HotspotParams) -> Vec<(Vec<usize>, Polygon)> {
    if points.len() < params.min_pts {
        return Vec::new();
    }
    let plot = optics(points, &params.optics());
    let tree = extract_clusters(&plot, &params.extract());
    tree.leaf_members(&plot)
        .into_iter()
        .filter_map(|members| {
            let pts: Vec<PlanarPoint> = members.iter().map(|&i| points[i]).collect();
            match convex_hull(&pts) {
                Ok(poly) => Some((members, poly)),
                Err(e) => {
                    log::debug!("skipping cluster of {} points: {e}", members.len());
                    None
                }
            }
        })
        .collect()
}

/// Hotspots of every catalog feature, ordered by feature then by position of
/// the cluster in the reachability ordering.
pub fn build_hotspots(catalog: &FeatureCatalog, points: &[PlanarPoint], params: &HotspotParams) -> Vec<Hotspot> {
    catalog
        .members
        .par_iter()
        .enumerate()
        .flat_map_iter(|(f, venues)| {
            let pts: Vec<PlanarPoint> = venues.iter().map(|&v| points[v as usize]).collect();
            cluster_polygons(&pts, params)
                .into_iter()
                .map(move |(members, polygon)| {
                    let mut members: Vec<u32> = members.into_iter().map(|i| venues[i]).collect();
                    members.sort_unstable();
                    Hotspot {
                        feature_id: f,
                        feature_key: catalog.features[f].key.clone(),
                        member_count: members.len(),
                        density: members.len() as f64 / polygon.area_km2(),
                        polygon,
                        members,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Sparse non-negative vector with entries sorted by dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect(),
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    pub fn get(&self, dim: u32) -> f64 {
        match self.entries.binary_search_by_key(&dim, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One sparse vector per grid cell, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellVectorField {
    pub n_rows: u32,
    pub n_cols: u32,
    pub dim: usize,
    pub vectors: Vec<SparseVector>,
}

impl CellVectorField {
    pub fn get(&self, cell: CellIndex) -> &SparseVector {
        &self.vectors[cell.row as usize * self.n_cols as usize + cell.col as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellIndex, &SparseVector)> {
        let cols = self.n_cols as usize;
        self.vectors
            .iter()
            .enumerate()
            .map(move |(i, v)| (CellIndex::new((i / cols) as u32, (i % cols) as u32), v))
    }
}

/// Cells whose center lies inside or on the polygon.
pub fn covered_cells(grid: &CityGrid, polygon: &Polygon) -> Vec<CellIndex> {
    let (lo, hi) = polygon.bounds();
    let lo = grid.local_offset(&lo);
    let hi = grid.local_offset(&hi);
    let s = grid.cell_size;
    let span = |a: f64, b: f64, n: u32| {
        let first = ((a / s - 0.5).ceil().max(0.0)) as i64;
        let last = ((b / s - 0.5).floor()).min(n as f64 - 1.0) as i64;
        first..=last
    };
    let mut out = Vec::new();
    for row in span(lo.y, hi.y, grid.n_rows) {
        for col in span(lo.x, hi.x, grid.n_cols) {
            let cell = CellIndex::new(row as u32, col as u32);
            if polygon.contains(&grid.cell_center(cell)) {
                out.push(cell);
            }
        }
    }
    out
}

/// Rasterizes hotspots: a cell takes, per feature, the highest density among
/// that feature's hotspots covering its center, and 0 elsewhere.
pub fn vectorize_cells(hotspots: &[Hotspot], grid: &CityGrid, dim: usize) -> CellVectorField {
    let mut hits: Vec<(usize, u32, f64)> = hotspots
        .par_iter()
        .flat_map_iter(|h| {
            covered_cells(grid, &h.polygon)
                .into_iter()
                .map(move |c| (grid.linear(c), h.feature_id as u32, h.density))
        })
        .collect();
    hits.par_sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(b.2.total_cmp(&a.2)));
    let mut vectors = vec![SparseVector::default(); grid.len()];
    for (cell, f, d) in hits {
        let v = &mut vectors[cell];
        // sorted by density descending within (cell, feature): first one wins
        if v.entries.last().map(|e| e.0) != Some(f) {
            v.entries.push((f, d));
        }
    }
    CellVectorField {
        n_rows: grid.n_rows,
        n_cols: grid.n_cols,
        dim,
        vectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureDef, FeatureKind};
    use crate::geo::GeoPoint;

    fn grid() -> CityGrid {
        CityGrid::from_extent(GeoPoint::new(40.70, -74.02).unwrap(), 2000.0, 2000.0, 100.0).unwrap()
    }

    fn square(grid: &CityGrid, x0: f64, y0: f64, side: f64) -> Polygon {
        let o = grid.cell_corners(CellIndex::new(0, 0))[0];
        Polygon::rectangle(
            PlanarPoint::new(o.x + x0, o.y + y0),
            PlanarPoint::new(o.x + x0 + side, o.y + y0 + side),
        )
        .unwrap()
    }

    fn hotspot(feature_id: usize, polygon: Polygon, density: f64) -> Hotspot {
        Hotspot {
            feature_id,
            feature_key: format!("f{feature_id}"),
            polygon,
            member_count: 0,
            density,
            members: Vec::new(),
        }
    }

    fn catalog(members: Vec<Vec<u32>>) -> FeatureCatalog {
        FeatureCatalog {
            features: (0..members.len())
                .map(|i| FeatureDef {
                    key: format!("f{i}"),
                    name: format!("F{i}"),
                    kind: FeatureKind::PlaceType,
                })
                .collect(),
            members,
        }
    }

    #[test]
    fn five_venues_in_a_quarter_square_kilometer() {
        // four corners of a 500 m square and its center
        let pts = vec![
            PlanarPoint::new(0.0, 0.0),
            PlanarPoint::new(500.0, 0.0),
            PlanarPoint::new(500.0, 500.0),
            PlanarPoint::new(0.0, 500.0),
            PlanarPoint::new(250.0, 250.0),
        ];
        let hs = build_hotspots(&catalog(vec![vec![0, 1, 2, 3, 4]]), &pts, &HotspotParams::default());
        assert_eq!(hs.len(), 1);
        assert!((hs[0].polygon.area_km2() - 0.25).abs() < 1e-12);
        assert!((hs[0].density - 20.0).abs() < 1e-9);
        assert_eq!(hs[0].member_count, 5);
    }

    #[test]
    fn too_few_venues_give_no_hotspot() {
        let pts = vec![PlanarPoint::new(0.0, 0.0), PlanarPoint::new(50.0, 0.0), PlanarPoint::new(0.0, 50.0)];
        assert!(build_hotspots(&catalog(vec![vec![0, 1, 2]]), &pts, &HotspotParams::default()).is_empty());
    }

    #[test]
    fn features_sharing_venues_share_polygons() {
        let pts: Vec<PlanarPoint> = (0..12)
            .map(|i| PlanarPoint::new(((i * 7) % 5) as f64 * 40.0, ((i * 3) % 4) as f64 * 30.0))
            .collect();
        let all: Vec<u32> = (0..12).collect();
        let hs = build_hotspots(&catalog(vec![all.clone(), all]), &pts, &HotspotParams::default());
        let a: Vec<_> = hs.iter().filter(|h| h.feature_id == 0).map(|h| &h.polygon).collect();
        let b: Vec<_> = hs.iter().filter(|h| h.feature_id == 1).map(|h| &h.polygon).collect();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn collinear_cluster_is_skipped() {
        let pts: Vec<PlanarPoint> = (0..8).map(|i| PlanarPoint::new(i as f64 * 10.0, 0.0)).collect();
        let hs = build_hotspots(&catalog(vec![(0..8).collect()]), &pts, &HotspotParams::default());
        assert!(hs.is_empty());
    }

    #[test]
    fn covered_cell_takes_density() {
        let g = grid();
        let h = hotspot(1, square(&g, 0.0, 0.0, 500.0), 20.0);
        let field = vectorize_cells(&[h], &g, 3);
        assert_eq!(field.get(CellIndex::new(2, 2)).get(1), 20.0);
        assert_eq!(field.get(CellIndex::new(2, 2)).nnz(), 1);
        assert!(field.get(CellIndex::new(10, 10)).is_zero());
        assert_eq!(field.iter().filter(|(_, v)| !v.is_zero()).count(), 25);
    }

    #[test]
    fn overlapping_hotspots_take_the_maximum() {
        let g = grid();
        let hs = [
            hotspot(0, square(&g, 0.0, 0.0, 600.0), 10.0),
            hotspot(0, square(&g, 300.0, 300.0, 600.0), 30.0),
        ];
        let field = vectorize_cells(&hs, &g, 1);
        assert_eq!(field.get(CellIndex::new(4, 4)).get(0), 30.0);
        assert_eq!(field.get(CellIndex::new(1, 1)).get(0), 10.0);
        assert_eq!(field.get(CellIndex::new(8, 8)).get(0), 30.0);
    }

    #[test]
    fn covered_cells_match_brute_force() {
        let g = grid();
        let o = g.cell_corners(CellIndex::new(0, 0))[0];
        let poly = convex_hull(&[
            PlanarPoint::new(o.x + 130.0, o.y + 70.0),
            PlanarPoint::new(o.x + 1210.0, o.y + 340.0),
            PlanarPoint::new(o.x + 820.0, o.y + 1499.0),
            PlanarPoint::new(o.x + 95.0, o.y + 905.0),
        ])
        .unwrap();
        let fast = covered_cells(&g, &poly);
        let slow: Vec<CellIndex> = g.cells().filter(|&c| poly.contains(&g.cell_center(c))).collect();
        assert_eq!(fast, slow);
    }

    #[test]
    fn sparse_round_trip() {
        let v = SparseVector::from_dense(&[0.0, 2.5, 0.0, 1.0]);
        assert_eq!(v.entries, vec![(1, 2.5), (3, 1.0)]);
        assert_eq!(v.to_dense(4), vec![0.0, 2.5, 0.0, 1.0]);
        assert_eq!(v.get(2), 0.0);
    }
}
