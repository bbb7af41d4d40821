//! QuickHull for planar point sets.

use super::point::PlanarPoint;
use super::polygon::{cross, Polygon};
use crate::error::{Error, Result};

/// Convex hull of `points` as a counter-clockwise polygon. Points lying on a
/// hull edge are not reported as vertices.
pub fn convex_hull(points: &[PlanarPoint]) -> Result<Polygon> {
    let idx = hull_indices(points)?;
    Ok(Polygon::from_ccw_unchecked(
        idx.into_iter().map(|i| points[i]).collect(),
    ))
}

/// Indices of the hull vertices in counter-clockwise order, starting from the
/// leftmost (then lowest) input point.
pub fn hull_indices(points: &[PlanarPoint]) -> Result<Vec<usize>> {
    if points.len() < 3 {
        return Err(Error::DegenerateGeometry("fewer than 3 points"));
    }
    if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::DegenerateGeometry("non-finite coordinate"));
    }
    let key = |p: &PlanarPoint| (p.x, p.y);
    let mut left = 0;
    let mut right = 0;
    for (i, p) in points.iter().enumerate() {
        if key(p) < key(&points[left]) {
            left = i;
        }
        if key(p) > key(&points[right]) {
            right = i;
        }
    }
    if key(&points[left]) == key(&points[right]) {
        return Err(Error::DegenerateGeometry("all points coincide"));
    }

    let a = points[left];
    let b = points[right];
    let mut below = Vec::new();
    let mut above = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let c = cross(&a, &b, p);
        if c < 0.0 {
            below.push(i);
        } else if c > 0.0 {
            above.push(i);
        }
    }
    if below.is_empty() && above.is_empty() {
        return Err(Error::DegenerateGeometry("all points are collinear"));
    }

    let mut out = Vec::with_capacity(16);
    out.push(left);
    expand(points, left, right, &below, &mut out);
    out.push(right);
    expand(points, right, left, &above, &mut out);
    Ok(out)
}

/// Appends the hull chain strictly to the right of `a -> b`, in order.
fn expand(points: &[PlanarPoint], a: usize, b: usize, candidates: &[usize], out: &mut Vec<usize>) {
    if candidates.is_empty() {
        return;
    }
    let pa = points[a];
    let pb = points[b];
    // Equally far candidates lie on one line parallel to `a -> b`; only its
    // ends are vertices, so ties go to the one furthest along `a -> b`.
    let along = |p: &PlanarPoint| (p.x - pa.x) * (pb.x - pa.x) + (p.y - pa.y) * (pb.y - pa.y);
    let mut far = candidates[0];
    let mut far_d = cross(&pa, &pb, &points[far]);
    for &i in &candidates[1..] {
        let d = cross(&pa, &pb, &points[i]);
        if d < far_d || (d == far_d && along(&points[i]) > along(&points[far])) {
            far = i;
            far_d = d;
        }
    }
    let pc = points[far];
    let mut right_of_ac = Vec::new();
    let mut right_of_cb = Vec::new();
    for &i in candidates {
        if i == far {
            continue;
        }
        if cross(&pa, &pc, &points[i]) < 0.0 {
            right_of_ac.push(i);
        } else if cross(&pc, &pb, &points[i]) < 0.0 {
            right_of_cb.push(i);
        }
    }
    expand(points, a, far, &right_of_ac, out);
    out.push(far);
    expand(points, far, b, &right_of_cb, out);
}
