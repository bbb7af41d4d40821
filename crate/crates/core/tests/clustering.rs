mod common;

use std::collections::BTreeSet;

use common::{blobs, dbscan};
use hoodmine::geo::PlanarPoint;
use hoodmine::hotspots::{extract_clusters, optics, ExtractParams, OpticsParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn leaves(points: &[PlanarPoint]) -> BTreeSet<Vec<usize>> {
    let plot = optics(points, &OpticsParams::default());
    extract_clusters(&plot, &ExtractParams::default())
        .leaf_members(&plot)
        .into_iter()
        .collect()
}

fn shuffled(rng: &mut ChaCha8Rng, pts: Vec<PlanarPoint>) -> Vec<PlanarPoint> {
    use rand::seq::SliceRandom;
    let mut pts = pts;
    pts.shuffle(rng);
    pts
}

#[test]
fn two_blob_reachability_has_one_spike() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts = blobs(&mut rng, &[(0.0, 0.0), (5000.0, 0.0)], 10, 50.0);
    let plot = optics(&pts, &OpticsParams::default());
    let spikes: Vec<usize> = (1..plot.len()).filter(|&i| plot.reachability[i] > 1000.0).collect();
    assert_eq!(spikes, vec![10]);
    assert_eq!(dbscan(&pts, 200.0, 5).len(), 2);
    let l = leaves(&pts);
    assert_eq!(l.len(), 2);
    assert!(l.iter().all(|c| c.len() == 10));
}

#[test]
fn single_blob_reachability_below_diameter() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts = blobs(&mut rng, &[(100.0, 200.0)], 25, 60.0);
    let mut diameter: f64 = 0.0;
    for a in &pts {
        for b in &pts {
            diameter = diameter.max(a.distance(b));
        }
    }
    let plot = optics(&pts, &OpticsParams::default());
    let max = plot.reachability[1..].iter().cloned().fold(0.0, f64::max);
    assert!(max < diameter);
}

#[test]
fn three_blobs_match_density_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts = blobs(&mut rng, &[(0.0, 0.0), (5000.0, 0.0), (2500.0, 5000.0)], 10, 50.0);
    let pts = shuffled(&mut rng, pts);
    let oracle = dbscan(&pts, 200.0, 5);
    assert_eq!(oracle.len(), 3);
    assert_eq!(leaves(&pts), oracle);
}

const N_SETS: u64 = 500;

#[test]
fn well_separated_blobs_match_density_oracle_over_many_sets() {
    let mut failures = Vec::new();
    for seed in 0..N_SETS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(2..=6);
        let per = rng.random_range(10..=80);
        let centers: Vec<(f64, f64)> = (0..k).map(|i| ((i % 3) as f64 * 500.0, (i / 3) as f64 * 500.0)).collect();
        let pts = blobs(&mut rng, &centers, per, 50.0);
        let pts = shuffled(&mut rng, pts);
        if leaves(&pts) != dbscan(&pts, 200.0, 5) {
            failures.push(seed);
        }
    }
    assert!(failures.is_empty(), "mismatching seeds: {failures:?}");
}

#[test]
fn all_points_identical_is_one_cluster_without_a_hull() {
    let pts = vec![PlanarPoint::new(3.0, 4.0); 7];
    assert_eq!(leaves(&pts).len(), 1);
}

proptest! {
    #[test]
    fn ordering_is_a_deterministic_permutation(
        raw in prop::collection::vec((0.0f64..2000.0, 0.0f64..2000.0), 0..80),
        min_pts in 2usize..8,
        eps in prop::option::of(10.0f64..800.0),
    ) {
        let pts: Vec<PlanarPoint> = raw.iter().map(|&(x, y)| PlanarPoint::new(x, y)).collect();
        let params = OpticsParams { min_pts, eps };
        let a = optics(&pts, &params);
        let b = optics(&pts, &params);
        prop_assert_eq!(&a, &b);
        let mut seen = a.ordering.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..pts.len()).collect::<Vec<_>>());
        if !pts.is_empty() {
            prop_assert!(a.reachability[0].is_infinite());
        }
    }

    #[test]
    fn leaves_are_disjoint_and_nested(
        raw in prop::collection::vec((0.0f64..3000.0, 0.0f64..3000.0), 0..120),
    ) {
        let pts: Vec<PlanarPoint> = raw.iter().map(|&(x, y)| PlanarPoint::new(x, y)).collect();
        let plot = optics(&pts, &OpticsParams::default());
        let tree = extract_clusters(&plot, &ExtractParams::default());
        let leaves = tree.leaves();
        for w in leaves.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for l in leaves {
            prop_assert!(l.len() >= 5);
        }
        for node in &tree.nodes {
            for &c in &node.children {
                prop_assert!(tree.nodes[c].start >= node.start && tree.nodes[c].end <= node.end);
            }
        }
    }
}
