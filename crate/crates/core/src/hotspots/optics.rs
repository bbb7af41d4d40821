//! OPTICS ordering of planar points.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::geo::PlanarPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsParams {
    pub min_pts: usize,
    /// Neighborhood radius in meters; `None` means unbounded.
    pub eps: Option<f64>,
}

impl Default for OpticsParams {
    fn default() -> Self {
        OpticsParams {
            min_pts: 5,
            eps: None,
        }
    }
}

impl OpticsParams {
    fn eps(&self) -> f64 {
        self.eps.unwrap_or(f64::INFINITY)
    }
}

/// Cluster ordering with the reachability of each position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityPlot {
    /// Input indices in visiting order.
    pub ordering: Vec<usize>,
    /// Reachability distance per position; `f64::INFINITY` when unreached.
    pub reachability: Vec<f64>,
    /// Core distance per input point.
    pub core_distance: Vec<Option<f64>>,
}

impl ReachabilityPlot {
    pub fn len(&self) -> usize {
        self.ordering.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordering.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Runs OPTICS with Euclidean distance. Seeds are expanded by smallest
/// reachability, ties broken by lowest input index; when no seed is left the
/// lowest-index unprocessed point starts a new pass.
pub fn optics(points: &[PlanarPoint], params: &OpticsParams) -> ReachabilityPlot {
    let n = points.len();
    let min_pts = params.min_pts.max(1);
    if n < min_pts {
        return ReachabilityPlot {
            ordering: (0..n).collect(),
            reachability: vec![f64::INFINITY; n],
            core_distance: vec![None; n],
        };
    }
    if params.eps().is_finite() {
        indexed(points, min_pts, params.eps())
    } else {
        dense(points, min_pts)
    }
}

fn kth_smallest(dists: &mut [f64], k: usize) -> f64 {
    let (_, v, _) = dists.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    *v
}

/// Unbounded radius: every point neighbors every other, O(n^2) time and
/// O(n) memory.
fn dense(points: &[PlanarPoint], min_pts: usize) -> ReachabilityPlot {
    let n = points.len();
    let mut scratch = vec![0.0; n];
    let core: Vec<f64> = points
        .iter()
        .map(|p| {
            for (s, q) in scratch.iter_mut().zip(points) {
                *s = p.distance(q);
            }
            kth_smallest(&mut scratch, min_pts)
        })
        .collect();

    let mut reach = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    let mut plot = Vec::with_capacity(n);
    for _ in 0..n {
        let mut next = usize::MAX;
        for i in 0..n {
            if !done[i] && (next == usize::MAX || reach[i] < reach[next]) {
                next = i;
            }
        }
        done[next] = true;
        ordering.push(next);
        plot.push(reach[next]);
        let p = points[next];
        let c = core[next];
        for i in 0..n {
            if !done[i] {
                let r = c.max(p.distance(&points[i]));
                if r < reach[i] {
                    reach[i] = r;
                }
            }
        }
    }
    ReachabilityPlot {
        ordering,
        reachability: plot,
        core_distance: core.into_iter().map(Some).collect(),
    }
}

struct BucketGrid<'a> {
    points: &'a [PlanarPoint],
    size: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> BucketGrid<'a> {
    fn new(points: &'a [PlanarPoint], size: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, size)).or_default().push(i);
        }
        BucketGrid { points, size, buckets }
    }

    fn key(p: &PlanarPoint, size: f64) -> (i64, i64) {
        ((p.x / size).floor() as i64, (p.y / size).floor() as i64)
    }

    /// Points within `eps` of point `i` (itself included), with distances.
    fn neighbors(&self, i: usize, eps: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let p = self.points[i];
        let (bx, by) = Self::key(&p, self.size);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(b) = self.buckets.get(&(bx + dx, by + dy)) {
                    for &j in b {
                        let d = p.distance(&self.points[j]);
                        if d <= eps {
                            out.push((j, d));
                        }
                    }
                }
            }
        }
    }
}

fn indexed(points: &[PlanarPoint], min_pts: usize, eps: f64) -> ReachabilityPlot {
    let n = points.len();
    let grid = BucketGrid::new(points, eps);
    let mut nbrs = Vec::new();
    let mut dists = Vec::new();
    let core: Vec<Option<f64>> = (0..n)
        .map(|i| {
            grid.neighbors(i, eps, &mut nbrs);
            if nbrs.len() < min_pts {
                return None;
            }
            dists.clear();
            dists.extend(nbrs.iter().map(|&(_, d)| d));
            Some(kth_smallest(&mut dists, min_pts))
        })
        .collect();

    let mut reach = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    let mut plot = Vec::with_capacity(n);
    let mut cursor = 0;
    let mut seeds: BinaryHeap<Reverse<Key>> = BinaryHeap::new();
    while ordering.len() < n {
        let next = loop {
            match seeds.pop() {
                Some(Reverse(Key(r, i))) => {
                    if !done[i] && r == reach[i] {
                        break i;
                    }
                }
                None => {
                    while done[cursor] {
                        cursor += 1;
                    }
                    break cursor;
                }
            }
        };
        done[next] = true;
        ordering.push(next);
        plot.push(reach[next]);
        if let Some(c) = core[next] {
            grid.neighbors(next, eps, &mut nbrs);
            for &(j, d) in &nbrs {
                if done[j] {
                    continue;
                }
                let r = c.max(d);
                if r < reach[j] {
                    reach[j] = r;
                    seeds.push(Reverse(Key(r, j)));
                }
            }
        }
    }
    ReachabilityPlot {
        ordering,
        reachability: plot,
        core_distance: core,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, step: f64) -> Vec<PlanarPoint> {
        (0..n).map(|i| PlanarPoint::new(i as f64 * step, 0.0)).collect()
    }

    #[test]
    fn too_few_points_are_unreachable() {
        let plot = optics(&line(4, 10.0), &OpticsParams::default());
        assert_eq!(plot.ordering, vec![0, 1, 2, 3]);
        assert!(plot.reachability.iter().all(|r| r.is_infinite()));
    }

    #[test]
    fn ordering_is_a_permutation() {
        let pts: Vec<PlanarPoint> = (0..40)
            .map(|i| PlanarPoint::new(((i * 37) % 17) as f64 * 13.0, ((i * 11) % 7) as f64 * 29.0))
            .collect();
        for eps in [None, Some(60.0)] {
            let plot = optics(&pts, &OpticsParams { min_pts: 4, eps });
            let mut seen = plot.ordering.clone();
            seen.sort();
            assert_eq!(seen, (0..40).collect::<Vec<_>>());
            assert!(plot.reachability[0].is_infinite());
        }
    }

    #[test]
    fn bounded_and_unbounded_agree_when_eps_covers_everything() {
        let pts: Vec<PlanarPoint> = (0..30)
            .map(|i| PlanarPoint::new(((i * 7) % 11) as f64 * 5.0, ((i * 5) % 13) as f64 * 3.0))
            .collect();
        let a = optics(&pts, &OpticsParams { min_pts: 5, eps: None });
        let b = optics(&pts, &OpticsParams { min_pts: 5, eps: Some(1e6) });
        assert_eq!(a.ordering, b.ordering);
        assert_eq!(a.reachability, b.reachability);
    }

    #[test]
    fn core_distance_counts_the_point_itself() {
        let plot = optics(&line(6, 1.0), &OpticsParams { min_pts: 3, eps: None });
        // nearest three of point 0 (itself included) are 0, 1, 2
        assert_eq!(plot.core_distance[0], Some(2.0));
        assert_eq!(plot.core_distance[2], Some(1.0));
    }

    #[test]
    fn finite_eps_leaves_isolated_points_unreachable() {
        let mut pts = line(6, 1.0);
        pts.push(PlanarPoint::new(1000.0, 0.0));
        let plot = optics(&pts, &OpticsParams { min_pts: 3, eps: Some(5.0) });
        let pos = plot.ordering.iter().position(|&i| i == 6).unwrap();
        assert!(plot.reachability[pos].is_infinite());
        assert_eq!(plot.core_distance[6], None);
    }
}
