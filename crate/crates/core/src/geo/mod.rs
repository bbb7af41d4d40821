//! Geographic primitives: coordinates, the local metric projection, the city
//! grid, convex polygons and hulls.

mod grid;
mod hull;
mod point;
mod polygon;

pub use grid::{extent_bbox, CellIndex, CityGrid, DEFAULT_CELL_SIZE_M};
pub use hull::{convex_hull, hull_indices};
pub use point::{meters_per_degree, BoundingBox, GeoPoint, LocalProjection, PlanarPoint, EARTH_RADIUS_M};
pub use polygon::{polygon_area, ring_contains, Polygon};
