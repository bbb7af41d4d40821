//! Per-feature density hotspots and the cell vectors they induce.

mod build;
mod extract;
mod optics;

pub use build::{
    build_hotspots, cluster_polygons, covered_cells, vectorize_cells, venue_points, CellVectorField, Hotspot,
    HotspotParams, SparseVector,
};
pub use extract::{extract_clusters, ClusterNode, ClusterTree, ExtractParams};
pub use optics::{optics, OpticsParams, ReachabilityPlot};
