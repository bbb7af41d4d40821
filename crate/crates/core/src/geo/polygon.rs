use serde::{Deserialize, Serialize};

use super::point::PlanarPoint;
use crate::error::{Error, Result};

// Relative tolerance for treating a point as lying on an edge.
const EDGE_EPS: f64 = 1e-9;

pub(crate) fn cross(o: &PlanarPoint, a: &PlanarPoint, b: &PlanarPoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex polygon in projected meters. Vertices are counter-clockwise and the
/// ring is closed implicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<PlanarPoint>,
}

impl Polygon {
    /// Validates a counter-clockwise convex ring. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<PlanarPoint>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegenerateGeometry("polygon needs at least 3 vertices"));
        }
        let signed = signed_area(&vertices);
        if !(signed.abs() > 0.0) {
            return Err(Error::DegenerateGeometry("polygon has zero area"));
        }
        if signed < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let c = cross(&vertices[i], &vertices[(i + 1) % n], &vertices[(i + 2) % n]);
            if c < 0.0 {
                return Err(Error::DegenerateGeometry("polygon is not convex"));
            }
        }
        Ok(Polygon { vertices })
    }

    pub(crate) fn from_ccw_unchecked(vertices: Vec<PlanarPoint>) -> Self {
        Polygon { vertices }
    }

    pub fn rectangle(min: PlanarPoint, max: PlanarPoint) -> Result<Self> {
        Polygon::new(vec![
            min,
            PlanarPoint::new(max.x, min.y),
            max,
            PlanarPoint::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[PlanarPoint] {
        &self.vertices
    }

    pub fn contains(&self, p: &PlanarPoint) -> bool {
        ring_contains(&self.vertices, p)
    }

    /// Shoelace area in square meters.
    pub fn area_m2(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn area_km2(&self) -> f64 {
        self.area_m2() / 1e6
    }

    pub fn bounds(&self) -> (PlanarPoint, PlanarPoint) {
        ring_bounds(&self.vertices)
    }
}

pub fn polygon_area(poly: &Polygon) -> f64 {
    poly.area_km2()
}

pub(crate) fn signed_area(ring: &[PlanarPoint]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = &ring[i];
        let b = &ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

pub(crate) fn ring_bounds(ring: &[PlanarPoint]) -> (PlanarPoint, PlanarPoint) {
    let mut lo = PlanarPoint::new(f64::INFINITY, f64::INFINITY);
    let mut hi = PlanarPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in ring {
        lo.x = lo.x.min(v.x);
        lo.y = lo.y.min(v.y);
        hi.x = hi.x.max(v.x);
        hi.y = hi.y.max(v.y);
    }
    (lo, hi)
}

fn on_segment(a: &PlanarPoint, b: &PlanarPoint, p: &PlanarPoint) -> bool {
    let len = a.distance(b);
    let scale = len.max(1.0);
    if cross(a, b, p).abs() > EDGE_EPS * scale * scale {
        return false;
    }
    let tol = EDGE_EPS * scale;
    p.x >= a.x.min(b.x) - tol
        && p.x <= a.x.max(b.x) + tol
        && p.y >= a.y.min(b.y) - tol
        && p.y <= a.y.max(b.y) + tol
}

/// Even-odd ray casting over a simple ring; points on an edge are inside.
pub fn ring_contains(ring: &[PlanarPoint], p: &PlanarPoint) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = &ring[i];
        let b = &ring[j];
        if on_segment(a, b, p) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
