//! H_Index homogeneity: how similar each grid cell is to its surroundings.

mod hindex;
mod similarity;

use std::fmt::Write as _;

pub use hindex::{
    h_index, h_index_map, neighbors, HIndexMap, HIndexParams, Normalization, Stencil, DEFAULT_RADIUS_M,
};
pub use similarity::{norm, similarity, SimilarityMeasure};

use crate::geo::CityGrid;

/// Heatmap rows `row,col,lat,lon,h_index`, row-major from the south-west.
pub fn heatmap_csv(map: &HIndexMap, grid: &CityGrid) -> String {
    let mut out = String::from("row,col,lat,lon,h_index\n");
    for (cell, v) in map.iter() {
        let c = grid.cell_center_geo(cell);
        writeln!(out, "{},{},{:.7},{:.7},{}", cell.row, cell.col, c.lat, c.lon, v).unwrap();
    }
    out
}

/// Binary 8-bit PGM, north at the top. Values are scaled by the larger of 1
/// and the map maximum.
pub fn heatmap_pgm(map: &HIndexMap) -> Vec<u8> {
    let scale = map.max().max(1.0);
    let mut out = format!("P5\n{} {}\n255\n", map.n_cols, map.n_rows).into_bytes();
    for row in (0..map.n_rows as usize).rev() {
        let start = row * map.n_cols as usize;
        for &v in &map.values[start..start + map.n_cols as usize] {
            out.push((v / scale * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;

    #[test]
    fn exports() {
        let g = CityGrid::from_extent(GeoPoint::new(40.70, -74.02).unwrap(), 300.0, 200.0, 100.0).unwrap();
        let map = HIndexMap::from_values(2, 3, vec![0.0, 0.5, 1.0, 0.25, 0.0, 0.0], &HIndexParams::default());
        let csv = heatmap_csv(&map, &g);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[2].starts_with("0,1,") && lines[2].ends_with(",0.5"));
        let pgm = heatmap_pgm(&map);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(&pgm[header.len()..], &[64, 0, 0, 0, 128, 255]);
    }
}
