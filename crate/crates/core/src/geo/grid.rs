use serde::{Deserialize, Serialize};

use super::point::{meters_per_degree, BoundingBox, GeoPoint, LocalProjection, PlanarPoint};
use crate::error::{Error, Result};

pub const DEFAULT_CELL_SIZE_M: f64 = 100.0;

// Slack that absorbs the rounding of a degree-specified extent when it is an
// exact multiple of the cell size.
const EXTENT_SLACK: f64 = 1e-6;

/// Row/column of a grid cell. Rows grow northwards, columns eastwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub row: u32,
    pub col: u32,
}

impl CellIndex {
    pub const fn new(row: u32, col: u32) -> Self {
        CellIndex { row, col }
    }
}

/// Square raster superimposed on a city bounding box.
///
/// Cells are half-open squares `[k*s, (k+1)*s)` measured from the south-west
/// corner in the local projection; points on the far north/east edge of the
/// box fall into the last row/column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityGrid {
    pub bbox: BoundingBox,
    pub cell_size: f64,
    pub n_rows: u32,
    pub n_cols: u32,
    pub projection: LocalProjection,
    sw: PlanarPoint,
    width_m: f64,
    height_m: f64,
}

impl CityGrid {
    pub fn new(bbox: BoundingBox, cell_size: f64) -> Result<Self> {
        bbox.validate()?;
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::Config(format!("cell size must be positive, got {cell_size}")));
        }
        let projection = LocalProjection::new(bbox.center());
        let sw = projection.project(&bbox.south_west())?;
        let ne = projection.project(&bbox.north_east())?;
        let width_m = ne.x - sw.x;
        let height_m = ne.y - sw.y;
        let n_cols = ((width_m / cell_size) - EXTENT_SLACK).ceil().max(1.0) as u32;
        let n_rows = ((height_m / cell_size) - EXTENT_SLACK).ceil().max(1.0) as u32;
        Ok(CityGrid {
            bbox,
            cell_size,
            n_rows,
            n_cols,
            projection,
            sw,
            width_m,
            height_m,
        })
    }

    /// Builds a grid whose bbox spans `width_m` x `height_m` projected meters
    /// from the given south-west corner.
    pub fn from_extent(sw: GeoPoint, width_m: f64, height_m: f64, cell_size: f64) -> Result<Self> {
        let bbox = extent_bbox(sw, width_m, height_m)?;
        CityGrid::new(bbox, cell_size)
    }

    pub fn len(&self) -> usize {
        self.n_rows as usize * self.n_cols as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width_m(&self) -> f64 {
        self.width_m
    }

    pub fn height_m(&self) -> f64 {
        self.height_m
    }

    pub fn area_km2(&self) -> f64 {
        self.width_m * self.height_m / 1e6
    }

    pub fn cell_area_km2(&self) -> f64 {
        self.cell_size * self.cell_size / 1e6
    }

    pub fn linear(&self, cell: CellIndex) -> usize {
        cell.row as usize * self.n_cols as usize + cell.col as usize
    }

    pub fn from_linear(&self, idx: usize) -> CellIndex {
        let n_cols = self.n_cols as usize;
        CellIndex::new((idx / n_cols) as u32, (idx % n_cols) as u32)
    }

    pub fn contains_cell(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && row < self.n_rows as i64 && col < self.n_cols as i64
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.n_rows).flat_map(move |r| (0..self.n_cols).map(move |c| CellIndex::new(r, c)))
    }

    pub fn project(&self, p: &GeoPoint) -> Result<PlanarPoint> {
        self.projection.project(p)
    }

    pub fn unproject(&self, p: &PlanarPoint) -> GeoPoint {
        self.projection.unproject(p)
    }

    /// Offset of a projected point from the south-west corner.
    pub fn local_offset(&self, p: &PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(p.x - self.sw.x, p.y - self.sw.y)
    }

    /// Projected point at an offset from the south-west corner.
    pub fn at_offset(&self, x: f64, y: f64) -> PlanarPoint {
        PlanarPoint::new(self.sw.x + x, self.sw.y + y)
    }

    pub fn cell_of(&self, point: &GeoPoint) -> Result<CellIndex> {
        if !self.bbox.contains(point) {
            return Err(Error::OutOfBounds {
                lat: point.lat,
                lon: point.lon,
            });
        }
        let p = self.projection.project(point)?;
        self.cell_of_planar(&p).ok_or(Error::OutOfBounds {
            lat: point.lat,
            lon: point.lon,
        })
    }

    /// Cell of a projected point, or `None` when it is outside the raster.
    pub fn cell_of_planar(&self, p: &PlanarPoint) -> Option<CellIndex> {
        let off = self.local_offset(p);
        let row = cell_coord(off.y, self.cell_size, self.height_m, self.n_rows)?;
        let col = cell_coord(off.x, self.cell_size, self.width_m, self.n_cols)?;
        Some(CellIndex::new(row, col))
    }

    /// Projected center of a cell.
    pub fn cell_center(&self, cell: CellIndex) -> PlanarPoint {
        PlanarPoint::new(
            self.sw.x + (cell.col as f64 + 0.5) * self.cell_size,
            self.sw.y + (cell.row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn cell_center_geo(&self, cell: CellIndex) -> GeoPoint {
        self.unproject(&self.cell_center(cell))
    }

    /// Projected corners of a cell, counter-clockwise from south-west.
    pub fn cell_corners(&self, cell: CellIndex) -> [PlanarPoint; 4] {
        let x0 = self.sw.x + cell.col as f64 * self.cell_size;
        let y0 = self.sw.y + cell.row as f64 * self.cell_size;
        let s = self.cell_size;
        [
            PlanarPoint::new(x0, y0),
            PlanarPoint::new(x0 + s, y0),
            PlanarPoint::new(x0 + s, y0 + s),
            PlanarPoint::new(x0, y0 + s),
        ]
    }
}

fn cell_coord(offset: f64, cell: f64, extent: f64, n: u32) -> Option<u32> {
    if !(offset >= 0.0) || offset > extent + EXTENT_SLACK * cell {
        return None;
    }
    let k = (offset / cell).floor() as u64;
    Some(k.min(n as u64 - 1) as u32)
}

/// Bounding box spanning the given projected extent from a south-west corner.
pub fn extent_bbox(sw: GeoPoint, width_m: f64, height_m: f64) -> Result<BoundingBox> {
    let m = meters_per_degree();
    let north = sw.lat + height_m / m;
    let center_lat = 0.5 * (sw.lat + north);
    let east = sw.lon + width_m / (m * center_lat.to_radians().cos());
    BoundingBox::new(sw.lat, sw.lon, north, east)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> CityGrid {
        CityGrid::from_extent(GeoPoint::new(40.70, -74.02).unwrap(), 2000.0, 1500.0, 100.0).unwrap()
    }

    fn at_offset(g: &CityGrid, east_m: f64, north_m: f64) -> GeoPoint {
        let sw = g.project(&g.bbox.south_west()).unwrap();
        g.unproject(&PlanarPoint::new(sw.x + east_m, sw.y + north_m))
    }

    #[test]
    fn dimensions_follow_extent() {
        let g = grid();
        assert_eq!((g.n_rows, g.n_cols), (15, 20));
        assert!((g.width_m() - 2000.0).abs() < 1e-6);
    }

    #[test]
    fn south_west_corner_is_origin_cell() {
        let g = grid();
        assert_eq!(g.cell_of(&g.bbox.south_west()).unwrap(), CellIndex::new(0, 0));
    }

    #[test]
    fn floor_division_of_offsets() {
        let g = grid();
        let p = at_offset(&g, 250.0, 150.0);
        assert_eq!(g.cell_of(&p).unwrap(), CellIndex::new(1, 2));
    }

    #[test]
    fn half_open_lower_edge() {
        let g = grid();
        let sw = g.project(&g.bbox.south_west()).unwrap();
        let p = PlanarPoint::new(sw.x, sw.y + 100.0);
        assert_eq!(g.cell_of_planar(&p).unwrap(), CellIndex::new(1, 0));
    }

    #[test]
    fn far_edge_belongs_to_last_cell() {
        let g = grid();
        assert_eq!(
            g.cell_of(&g.bbox.north_east()).unwrap(),
            CellIndex::new(g.n_rows - 1, g.n_cols - 1)
        );
    }

    #[test]
    fn outside_points_error() {
        let g = grid();
        let p = GeoPoint::new(g.bbox.north + 0.01, g.bbox.west).unwrap();
        assert!(matches!(g.cell_of(&p), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn adjacent_centers_are_one_cell_apart() {
        let g = grid();
        let a = g.cell_center(CellIndex::new(3, 4));
        let b = g.cell_center(CellIndex::new(3, 5));
        let c = g.cell_center(CellIndex::new(4, 4));
        assert!((b.x - a.x - 100.0).abs() < 1e-9 && (b.y - a.y).abs() < 1e-9);
        assert!((c.y - a.y - 100.0).abs() < 1e-9 && (c.x - a.x).abs() < 1e-9);
        assert_eq!(g.cell_of_planar(&a), Some(CellIndex::new(3, 4)));
    }

    #[test]
    fn linear_round_trip() {
        let g = grid();
        for cell in g.cells() {
            assert_eq!(g.from_linear(g.linear(cell)), cell);
        }
        assert_eq!(g.cells().count(), g.len());
    }
}
