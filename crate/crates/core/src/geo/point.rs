use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean spherical earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters per degree of latitude on the spherical earth.
pub fn meters_per_degree() -> f64 {
    EARTH_RADIUS_M * std::f64::consts::PI / 180.0
}

/// WGS84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Range { lat, lon });
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// Point in a local metric frame, in meters east (`x`) and north (`y`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        PlanarPoint { x, y }
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &PlanarPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl BoundingBox {
    pub fn new(south: f64, west: f64, north: f64, east: f64) -> Result<Self> {
        let bbox = BoundingBox {
            south,
            west,
            north,
            east,
        };
        bbox.validate()?;
        Ok(bbox)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.south, self.west, self.north, self.east]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidBoundingBox("non-finite coordinate".into()));
        }
        if self.south >= self.north {
            return Err(Error::InvalidBoundingBox(format!(
                "south {} must be below north {}",
                self.south, self.north
            )));
        }
        if self.west >= self.east {
            return Err(Error::InvalidBoundingBox(format!(
                "west {} must be left of east {}",
                self.west, self.east
            )));
        }
        GeoPoint::new(self.south, self.west)?;
        GeoPoint::new(self.north, self.east)?;
        Ok(())
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        p.lat >= self.south && p.lat <= self.north && p.lon >= self.west && p.lon <= self.east
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lat: 0.5 * (self.south + self.north),
            lon: 0.5 * (self.west + self.east),
        }
    }

    pub fn south_west(&self) -> GeoPoint {
        GeoPoint {
            lat: self.south,
            lon: self.west,
        }
    }

    pub fn north_east(&self) -> GeoPoint {
        GeoPoint {
            lat: self.north,
            lon: self.east,
        }
    }
}

/// Equirectangular projection around an origin, cosine-corrected at the
/// origin latitude. Valid within [`LocalProjection::MAX_OFFSET_DEG`] of the
/// origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    pub origin: GeoPoint,
    pub meters_per_deg_lat: f64,
    pub meters_per_deg_lon: f64,
}

impl LocalProjection {
    pub const MAX_OFFSET_DEG: f64 = 2.0;

    pub fn new(origin: GeoPoint) -> Self {
        let m = meters_per_degree();
        LocalProjection {
            origin,
            meters_per_deg_lat: m,
            meters_per_deg_lon: m * origin.lat.to_radians().cos(),
        }
    }

    pub fn project(&self, p: &GeoPoint) -> Result<PlanarPoint> {
        let dlat = p.lat - self.origin.lat;
        let dlon = p.lon - self.origin.lon;
        if !(dlat.abs() <= Self::MAX_OFFSET_DEG && dlon.abs() <= Self::MAX_OFFSET_DEG) {
            return Err(Error::Range {
                lat: p.lat,
                lon: p.lon,
            });
        }
        Ok(PlanarPoint {
            x: dlon * self.meters_per_deg_lon,
            y: dlat * self.meters_per_deg_lat,
        })
    }

    pub fn unproject(&self, p: &PlanarPoint) -> GeoPoint {
        GeoPoint {
            lat: self.origin.lat + p.y / self.meters_per_deg_lat,
            lon: self.origin.lon + p.x / self.meters_per_deg_lon,
        }
    }
}
