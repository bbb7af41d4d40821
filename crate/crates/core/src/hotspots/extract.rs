//! Significant-cluster extraction from a reachability plot.
//!
//! The plot is split recursively at its local maxima, highest first. A split
//! point is kept when its reachability clearly exceeds the average of the
//! regions on both sides and both sides are large enough to be clusters. A
//! side too small to be a cluster is dropped as noise when it sits behind a
//! gap that stands out, and otherwise stays with its neighbor.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::optics::ReachabilityPlot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractParams {
    /// A split at `s` is significant when the neighboring averages are at
    /// most this fraction of `r(s)` on both sides.
    pub significance_ratio: f64,
    /// Adjacent leaves stay apart only when the largest reachability inside
    /// each is at most this fraction of the one separating them.
    pub cohesion_ratio: f64,
    /// A side too small to be a cluster is noise when the other side's
    /// largest interior reachability is at most this fraction of the gap.
    pub noise_ratio: f64,
    /// Fraction of each side used for its average.
    pub check_ratio: f64,
    /// Children of a node at least this fraction of its parent's size are
    /// attached to the parent directly.
    pub similarity_ratio: f64,
    pub min_cluster_size: usize,
    /// Local maxima must dominate `max(min_neighborhood, neighborhood_ratio * n)`
    /// positions on each side.
    pub neighborhood_ratio: f64,
    pub min_neighborhood: usize,
}

impl Default for ExtractParams {
    fn default() -> Self {
        ExtractParams {
            significance_ratio: 0.75,
            cohesion_ratio: 0.5,
            noise_ratio: 0.25,
            check_ratio: 0.8,
            similarity_ratio: 0.4,
            min_cluster_size: 5,
            neighborhood_ratio: 0.001,
            min_neighborhood: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterNode {
    /// Half-open range of ordering positions.
    pub start: usize,
    pub end: usize,
    pub children: Vec<usize>,
}

impl ClusterNode {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

/// Split hierarchy over the ordering plus the clusters read off it.
///
/// `nodes` is an arena with the root at index 0. Each leaf range is the
/// union of one or more adjacent childless nodes: neighbors whose separating
/// reachability does not stand out against their own internal reachability
/// are joined.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClusterTree {
    pub nodes: Vec<ClusterNode>,
    leaves: Vec<Range<usize>>,
}

impl ClusterTree {
    /// Cluster ranges in ordering order.
    pub fn leaves(&self) -> &[Range<usize>] {
        &self.leaves
    }

    /// Input point indices of each leaf, each sorted ascending.
    pub fn leaf_members(&self, plot: &ReachabilityPlot) -> Vec<Vec<usize>> {
        self.leaves
            .iter()
            .map(|r| {
                let mut m = plot.ordering[r.clone()].to_vec();
                m.sort_unstable();
                m
            })
            .collect()
    }

    fn terminal_ranges(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.children.is_empty() {
                out.push(node.range());
            } else {
                stack.extend(node.children.iter().copied());
            }
        }
        out.sort_by_key(|r| r.start);
        out
    }
}

/// Finite local maxima; unreachable positions count as lower than anything.
fn local_maxima(r: &[f64], nghsize: usize) -> Vec<usize> {
    let n = r.len();
    let v = |j: usize| if r[j].is_finite() { r[j] } else { f64::NEG_INFINITY };
    let mut out: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| {
            if !(r[i].is_finite() && r[i] > v(i - 1) && r[i] >= v(i + 1)) {
                return false;
            }
            let lo = i.saturating_sub(nghsize);
            let hi = (i + nghsize).min(n - 1);
            (lo..=hi).all(|j| v(j) <= r[i])
        })
        .collect();
    // highest first; the sort is stable so equal values keep position order
    out.sort_by(|&a, &b| r[b].total_cmp(&r[a]));
    out
}

fn finite_mean(values: &[f64]) -> f64 {
    let (sum, n) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn interior_max(r: &[f64], range: &Range<usize>) -> f64 {
    r[range.start + 1..range.end]
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0, |m, &v| m.max(v))
}

struct Task {
    node: usize,
    parent: Option<usize>,
    maxima: Vec<usize>,
}

/// Builds the cluster tree of a reachability plot.
///
/// Infinite reachability past the first position means the point was not
/// density-reachable from anything before it, so the plot is first cut into
/// segments at those positions.
pub fn extract_clusters(plot: &ReachabilityPlot, params: &ExtractParams) -> ClusterTree {
    let r = &plot.reachability;
    let n = r.len();
    let min_size = params.min_cluster_size.max(1);
    let mut tree = ClusterTree::default();
    if n == 0 {
        return tree;
    }
    tree.nodes.push(ClusterNode {
        start: 0,
        end: n,
        children: Vec::new(),
    });

    let nghsize = ((params.neighborhood_ratio * n as f64) as usize).max(params.min_neighborhood);
    let maxima = local_maxima(r, nghsize);

    let mut cuts: Vec<usize> = (1..n).filter(|&i| !r[i].is_finite()).collect();
    let mut tasks = Vec::new();
    if cuts.is_empty() {
        tasks.push(Task {
            node: 0,
            parent: None,
            maxima,
        });
    } else {
        cuts.insert(0, 0);
        cuts.push(n);
        for w in cuts.windows(2) {
            let (start, end) = (w[0], w[1]);
            let id = tree.nodes.len();
            tree.nodes.push(ClusterNode {
                start,
                end,
                children: Vec::new(),
            });
            tree.nodes[0].children.push(id);
            tasks.push(Task {
                node: id,
                parent: Some(0),
                maxima: maxima.iter().copied().filter(|&m| m > start && m < end).collect(),
            });
        }
    }

    while let Some(task) = tasks.pop() {
        split(&mut tree, r, params, min_size, task, &mut tasks);
    }
    tree.leaves = join_leaves(r, tree.terminal_ranges(), params.cohesion_ratio)
        .into_iter()
        .filter(|l| l.len() >= min_size)
        .collect();
    tree
}

fn split(
    tree: &mut ClusterTree,
    r: &[f64],
    params: &ExtractParams,
    min_size: usize,
    task: Task,
    tasks: &mut Vec<Task>,
) {
    let Task { node, parent, maxima } = task;
    let (start, end) = (tree.nodes[node].start, tree.nodes[node].end);

    // small-side rejections depend on the range, so children retry them
    let mut deferred = Vec::new();
    let mut rest = maxima.into_iter();
    while let Some(s) = rest.next() {
        let rs = r[s];
        // left side [start, s), right side [s, end); s opens the right side
        let left_len = s - start;
        let right_len = end - s;
        if rs <= 0.0 || (left_len < min_size && right_len < min_size) {
            continue;
        }
        if left_len < min_size || right_len < min_size {
            if let Some(kept) = drop_small_side(r, start, end, s, min_size, params.cohesion_ratio, params.noise_ratio) {
                let remaining: Vec<usize> = deferred.into_iter().chain(rest).collect();
                adopt(tree, params, node, parent, &[kept], remaining, tasks);
                return;
            }
            deferred.push(s);
            continue;
        }
        let check1 = ((params.check_ratio * left_len as f64).round() as usize).clamp(1, left_len);
        let check2 = ((params.check_ratio * (right_len - 1) as f64).round() as usize).max(1);
        let avg1 = finite_mean(&r[s - check1..s]);
        let avg2 = finite_mean(&r[s + 1..(s + 1 + check2).min(end)]);
        if avg1 > params.significance_ratio * rs || avg2 > params.significance_ratio * rs {
            continue;
        }

        let remaining: Vec<usize> = deferred.into_iter().chain(rest).collect();
        adopt(tree, params, node, parent, &[start..s, s..end], remaining, tasks);
        return;
    }
}

/// Hangs `ranges` below `node`, or below its parent when `node` is nearly as
/// large as the parent, and queues them for further splitting.
fn adopt(
    tree: &mut ClusterTree,
    params: &ExtractParams,
    node: usize,
    parent: Option<usize>,
    ranges: &[Range<usize>],
    maxima: Vec<usize>,
    tasks: &mut Vec<Task>,
) {
    let attach_to = match parent {
        Some(p) if tree.nodes[node].len() as f64 / tree.nodes[p].len() as f64 > params.similarity_ratio => {
            tree.nodes[p].children.retain(|&c| c != node);
            p
        }
        _ => node,
    };
    for range in ranges {
        let id = tree.nodes.len();
        tree.nodes.push(ClusterNode {
            start: range.start,
            end: range.end,
            children: Vec::new(),
        });
        tree.nodes[attach_to].children.push(id);
        tasks.push(Task {
            node: id,
            parent: Some(attach_to),
            maxima: maxima
                .iter()
                .copied()
                .filter(|&m| m > range.start && m < range.end)
                .collect(),
        });
    }
}

/// For a split at `s` with one side below `min_size`: widens that side over
/// the run of reachabilities above `ratio * r(s)` next to it, and returns the
/// other side when the small one still is small and the gap stands out
/// against the other side's interior. The small side is then noise.
fn drop_small_side(
    r: &[f64],
    start: usize,
    end: usize,
    s: usize,
    min_size: usize,
    run_ratio: f64,
    noise_ratio: f64,
) -> Option<Range<usize>> {
    let theta = run_ratio * r[s];
    let mut cut = s;
    let kept = if s - start < min_size {
        while cut + 1 < end && r[cut + 1] > theta {
            cut += 1;
        }
        cut..end
    } else {
        while cut > start + 1 && r[cut - 1] > theta {
            cut -= 1;
        }
        start..cut
    };
    let small = end - start - kept.len();
    (small < min_size && kept.len() >= min_size && interior_max(r, &kept) <= noise_ratio * r[s]).then_some(kept)
}

/// Joins adjacent ranges until every remaining boundary reachability exceeds
/// the internal reachability of both neighbors by the cohesion ratio.
/// The weakest boundary is joined first.
fn join_leaves(r: &[f64], mut pieces: Vec<Range<usize>>, ratio: f64) -> Vec<Range<usize>> {
    let mut inner: Vec<f64> = pieces.iter().map(|p| interior_max(r, p)).collect();
    loop {
        let mut weakest: Option<(usize, f64)> = None;
        for i in 1..pieces.len() {
            if pieces[i - 1].end != pieces[i].start {
                continue;
            }
            let gap = r[pieces[i].start];
            if !gap.is_finite() || inner[i - 1].max(inner[i]) <= ratio * gap {
                continue;
            }
            if weakest.is_none_or(|(_, g)| gap < g) {
                weakest = Some((i, gap));
            }
        }
        let Some((i, gap)) = weakest else { break };
        pieces[i - 1].end = pieces[i].end;
        inner[i - 1] = inner[i - 1].max(inner[i]).max(gap);
        pieces.remove(i);
        inner.remove(i);
    }
    pieces
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot(reach: Vec<f64>) -> ReachabilityPlot {
        let n = reach.len();
        ReachabilityPlot {
            ordering: (0..n).collect(),
            reachability: reach,
            core_distance: vec![None; n],
        }
    }

    #[test]
    fn all_infinite_gives_no_leaves() {
        let p = plot(vec![f64::INFINITY; 12]);
        assert!(extract_clusters(&p, &ExtractParams::default()).leaves().is_empty());
    }

    #[test]
    fn flat_plot_is_one_leaf() {
        let mut r = vec![10.0; 12];
        r[0] = f64::INFINITY;
        let t = extract_clusters(&plot(r), &ExtractParams::default());
        assert_eq!(t.leaves().to_vec(), vec![0..12]);
    }

    #[test]
    fn flat_plot_below_min_size_is_dropped() {
        let mut r = vec![10.0; 4];
        r[0] = f64::INFINITY;
        assert!(extract_clusters(&plot(r), &ExtractParams::default()).leaves().is_empty());
    }

    #[test]
    fn one_spike_splits_in_two() {
        let mut r = vec![10.0; 20];
        r[0] = f64::INFINITY;
        r[10] = 5000.0;
        let t = extract_clusters(&plot(r), &ExtractParams::default());
        assert_eq!(t.leaves().to_vec(), vec![0..10, 10..20]);
    }

    #[test]
    fn weak_bump_is_ignored() {
        let mut r = vec![10.0; 20];
        r[0] = f64::INFINITY;
        r[10] = 12.0;
        let t = extract_clusters(&plot(r), &ExtractParams::default());
        assert_eq!(t.leaves().to_vec(), vec![0..20]);
    }

    #[test]
    fn nested_spikes_make_three_leaves() {
        let mut r = vec![10.0; 30];
        r[0] = f64::INFINITY;
        r[10] = 5000.0;
        r[20] = 1000.0;
        let t = extract_clusters(&plot(r), &ExtractParams::default());
        assert_eq!(t.leaves().to_vec(), vec![0..10, 10..20, 20..30]);
        for node in &t.nodes {
            for &c in &node.children {
                assert!(t.nodes[c].start >= node.start && t.nodes[c].end <= node.end);
            }
        }
    }

    #[test]
    fn infinite_gaps_separate_segments() {
        let mut r = vec![10.0; 16];
        r[0] = f64::INFINITY;
        r[8] = f64::INFINITY;
        r[15] = f64::INFINITY;
        let t = extract_clusters(&plot(r), &ExtractParams::default());
        assert_eq!(t.leaves().to_vec(), vec![0..8, 8..15]);
    }

    #[test]
    fn far_small_side_is_noise() {
        let mut r = vec![10.0; 14];
        r[0] = f64::INFINITY;
        r[11] = 5000.0;
        let t = extract_clusters(&plot(r), &ExtractParams::default());
        assert_eq!(t.leaves().to_vec(), vec![0..11]);
    }

    #[test]
    fn far_small_group_with_a_run_of_high_values_is_noise() {
        let mut r = vec![10.0; 16];
        r[0] = f64::INFINITY;
        r[12] = 4000.0;
        r[13] = 4200.0;
        r[14] = 3900.0;
        r[15] = 4100.0;
        let t = extract_clusters(&plot(r), &ExtractParams::default());
        assert_eq!(t.leaves().to_vec(), vec![0..12]);
    }

    #[test]
    fn leading_noise_is_dropped_once_its_gap_stands_out() {
        let mut r = vec![10.0; 24];
        r[0] = f64::INFINITY;
        r[1] = 2400.0;
        r[2] = 2300.0;
        r[14] = 1500.0;
        let t = extract_clusters(&plot(r), &ExtractParams::default());
        assert_eq!(t.leaves().to_vec(), vec![2..14, 14..24]);
    }

    #[test]
    fn near_small_side_stays_attached() {
        let mut r = vec![10.0; 14];
        r[0] = f64::INFINITY;
        r[5] = 24.0;
        r[11] = 30.0;
        let t = extract_clusters(&plot(r), &ExtractParams::default());
        assert_eq!(t.leaves().to_vec(), vec![0..14]);
    }

    #[test]
    fn gap_that_does_not_stand_out_is_joined() {
        let mut r = vec![10.0; 20];
        r[0] = f64::INFINITY;
        r[10] = 100.0;
        for v in &mut r[13..17] {
            *v = 60.0;
        }
        let t = extract_clusters(&plot(r), &ExtractParams::default());
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.leaves().to_vec(), vec![0..20]);
    }
}
