//! Greedy information-gain decision tree over the two venue metrics used to
//! separate local from touristic venues.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::locality::{Label, VenueMetrics};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeFeature {
    TouristRatio,
    UniqueUsersRatio,
}

impl TreeFeature {
    pub const ALL: [TreeFeature; 2] = [TreeFeature::TouristRatio, TreeFeature::UniqueUsersRatio];

    pub fn value(&self, e: &Sample) -> f64 {
        match self {
            TreeFeature::TouristRatio => e.tourist_ratio,
            TreeFeature::UniqueUsersRatio => e.unique_users_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tourist_ratio: f64,
    pub unique_users_ratio: f64,
}

impl From<&VenueMetrics> for Sample {
    fn from(m: &VenueMetrics) -> Self {
        Sample {
            tourist_ratio: m.tourist_ratio,
            unique_users_ratio: m.unique_users_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub sample: Sample,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(tourist_ratio: f64, unique_users_ratio: f64, label: Label) -> Self {
        LabeledExample {
            sample: Sample {
                tourist_ratio,
                unique_users_ratio,
            },
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    #[default]
    InformationGain,
    GainRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: u32,
    #[serde(default)]
    pub criterion: SplitCriterion,
    /// Fewest training examples a split may leave on either side.
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    /// Collapse subtrees whose pessimistic error estimate (confidence 0.25)
    /// is no better than a single leaf.
    #[serde(default = "default_prune")]
    pub prune: bool,
}

fn default_prune() -> bool {
    true
}

fn default_min_leaf() -> usize {
    2
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 3,
            criterion: SplitCriterion::InformationGain,
            min_leaf: default_min_leaf(),
            prune: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: Label,
    },
    Split {
        feature: TreeFeature,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub max_depth: u32,
}

impl DecisionTree {
    /// Descends the tree; values equal to a threshold go left.
    pub fn classify(&self, s: &Sample) -> Label {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if feature.value(s) <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> u32 {
        fn d(n: &TreeNode) -> u32 {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }

    pub fn leaves(&self) -> usize {
        fn l(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Split { left, right, .. } => l(left) + l(right),
            }
        }
        l(&self.root)
    }
}

pub fn classify_venue(tree: &DecisionTree, metrics: &VenueMetrics) -> Label {
    tree.classify(&Sample::from(metrics))
}

fn entropy(tourists: usize, total: usize) -> f64 {
    if total == 0 || tourists == 0 || tourists == total {
        return 0.0;
    }
    let p = tourists as f64 / total as f64;
    let q = 1.0 - p;
    -(p * p.log2() + q * q.log2())
}

fn majority(examples: &[LabeledExample]) -> Label {
    let tourists = examples.iter().filter(|e| e.label == Label::Tourist).count();
    if tourists * 2 > examples.len() {
        Label::Tourist
    } else {
        Label::Local
    }
}

struct Candidate {
    feature: TreeFeature,
    threshold: f64,
    score: f64,
}

fn best_split(examples: &[LabeledExample], criterion: SplitCriterion, min_leaf: usize) -> Option<Candidate> {
    let n = examples.len();
    let total_t = examples.iter().filter(|e| e.label == Label::Tourist).count();
    let parent = entropy(total_t, n);
    let mut best: Option<Candidate> = None;
    for feature in TreeFeature::ALL {
        let mut sorted: Vec<(f64, bool)> = examples
            .iter()
            .map(|e| (feature.value(&e.sample), e.label == Label::Tourist))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_n = 0;
        let mut left_t = 0;
        for i in 0..n - 1 {
            left_n += 1;
            if sorted[i].1 {
                left_t += 1;
            }
            let right_n = n - left_n;
            if sorted[i].0 == sorted[i + 1].0 || left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let right_t = total_t - left_t;
            let cond = (left_n as f64 * entropy(left_t, left_n)
                + right_n as f64 * entropy(right_t, right_n))
                / n as f64;
            let gain = parent - cond;
            let score = match criterion {
                SplitCriterion::InformationGain => gain,
                SplitCriterion::GainRatio => {
                    let split_info = entropy(left_n, n);
                    if split_info > 0.0 {
                        gain / split_info
                    } else {
                        0.0
                    }
                }
            };
            let threshold = 0.5 * (sorted[i].0 + sorted[i + 1].0);
            if best.as_ref().map(|b| score > b.score + 1e-12).unwrap_or(true) {
                best = Some(Candidate {
                    feature,
                    threshold,
                    score,
                });
            }
        }
    }
    best.filter(|b| b.score > 1e-12)
}

/// Upper normal quantile for a 0.25 confidence level.
const PRUNE_Z: f64 = 0.674_489_750_196_081_7;
const PRUNE_CF: f64 = 0.25;

/// Extra errors to expect beyond `e` observed in `n` cases: the upper
/// confidence bound on the binomial error rate, times `n`, minus `e`.
fn added_errors(n: f64, e: f64) -> f64 {
    if e < 1.0 {
        let base = n * (1.0 - PRUNE_CF.powf(1.0 / n));
        return if e == 0.0 { base } else { base + e * (added_errors(n, 1.0) - base) };
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z2 = PRUNE_Z * PRUNE_Z;
    let f = (e + 0.5) / n;
    let r = (f + z2 / (2.0 * n) + PRUNE_Z * (f / n - f * f / n + z2 / (4.0 * n * n)).sqrt()) / (1.0 + z2 / n);
    r * n - e
}

fn leaf_estimate(examples: &[LabeledExample]) -> (TreeNode, f64) {
    let label = majority(examples);
    let errors = examples.iter().filter(|e| e.label != label).count() as f64;
    let n = examples.len() as f64;
    (TreeNode::Leaf { label }, errors + added_errors(n, errors))
}

/// Grows a subtree and returns it with its estimated error count.
fn grow(examples: &[LabeledExample], depth: u32, params: &TreeParams) -> (TreeNode, f64) {
    let tourists = examples.iter().filter(|e| e.label == Label::Tourist).count();
    let pure = tourists == 0 || tourists == examples.len();
    if pure || depth >= params.max_depth || examples.len() < 2 {
        return leaf_estimate(examples);
    }
    let Some(split) = best_split(examples, params.criterion, params.min_leaf) else {
        return leaf_estimate(examples);
    };
    let (left, right): (Vec<LabeledExample>, Vec<LabeledExample>) = examples
        .iter()
        .partition(|e| split.feature.value(&e.sample) <= split.threshold);
    let (left, le) = grow(&left, depth + 1, params);
    let (right, re) = grow(&right, depth + 1, params);
    if params.prune {
        let leaf = leaf_estimate(examples);
        if leaf.1 <= le + re + 0.1 {
            return leaf;
        }
    }
    let node = TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    };
    (node, le + re)
}

/// Trains a tree on midpoint thresholds between sorted distinct values.
/// Leaves take the majority label, with ties going to `Local`.
pub fn train_tree(examples: &[LabeledExample], params: &TreeParams) -> Result<DecisionTree> {
    if examples.is_empty() {
        return Err(Error::Data("no labeled venues to train the classifier".into()));
    }
    Ok(DecisionTree {
        root: grow(examples, 0, params).0,
        max_depth: params.max_depth,
    })
}

/// Pooled k-fold cross-validated accuracy: the fraction of examples whose
/// held-out prediction matches their label.
pub fn cross_validate_tree(examples: &[LabeledExample], k: usize, seed: u64, params: &TreeParams) -> Result<f64> {
    if k < 2 || examples.len() < k {
        return Err(Error::Config(format!(
            "{}-fold cross-validation needs at least {k} examples, got {}",
            k,
            examples.len()
        )));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut correct = 0;
    for fold in 0..k {
        let (test, train): (Vec<(usize, usize)>, Vec<(usize, usize)>) =
            order.iter().copied().enumerate().partition(|(pos, _)| pos % k == fold);
        let train: Vec<LabeledExample> = train.into_iter().map(|(_, i)| examples[i]).collect();
        let tree = train_tree(&train, params)?;
        correct += test
            .into_iter()
            .filter(|(_, i)| tree.classify(&examples[*i].sample) == examples[*i].label)
            .count();
    }
    Ok(correct as f64 / examples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable() -> Vec<LabeledExample> {
        let mut v = Vec::new();
        for i in 0..10 {
            v.push(LabeledExample::new(0.65 + 0.03 * i as f64, 0.5, Label::Tourist));
            v.push(LabeledExample::new(0.05 + 0.03 * i as f64, 0.5, Label::Local));
        }
        v
    }

    #[test]
    fn separable_set_needs_one_split() {
        let ex = separable();
        let tree = train_tree(&ex, &TreeParams::default()).unwrap();
        assert_eq!(tree.depth(), 1);
        assert!(ex.iter().all(|e| tree.classify(&e.sample) == e.label));
        match &tree.root {
            TreeNode::Split { threshold, .. } => assert!(*threshold > 0.32 && *threshold < 0.65),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn identical_features_give_single_leaf() {
        let ex = vec![
            LabeledExample::new(0.3, 0.3, Label::Tourist),
            LabeledExample::new(0.3, 0.3, Label::Tourist),
            LabeledExample::new(0.3, 0.3, Label::Local),
        ];
        let tree = train_tree(&ex, &TreeParams::default()).unwrap();
        assert_eq!(tree.root, TreeNode::Leaf { label: Label::Tourist });
    }

    #[test]
    fn majority_tie_goes_local() {
        let ex = vec![
            LabeledExample::new(0.3, 0.3, Label::Tourist),
            LabeledExample::new(0.3, 0.3, Label::Local),
        ];
        let tree = train_tree(&ex, &TreeParams::default()).unwrap();
        assert_eq!(tree.root, TreeNode::Leaf { label: Label::Local });
    }

    #[test]
    fn single_class_gives_single_leaf() {
        let ex: Vec<_> = (0..5).map(|i| LabeledExample::new(i as f64 / 10.0, 0.5, Label::Local)).collect();
        let tree = train_tree(&ex, &TreeParams::default()).unwrap();
        assert_eq!(tree.leaves(), 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(train_tree(&[], &TreeParams::default()).is_err());
    }

    fn stump() -> DecisionTree {
        DecisionTree {
            root: TreeNode::Split {
                feature: TreeFeature::TouristRatio,
                threshold: 0.5,
                left: Box::new(TreeNode::Leaf { label: Label::Local }),
                right: Box::new(TreeNode::Leaf { label: Label::Tourist }),
            },
            max_depth: 1,
        }
    }

    #[test]
    fn stump_classification_and_tie_rule() {
        let t = stump();
        let s = |x| Sample {
            tourist_ratio: x,
            unique_users_ratio: 0.9,
        };
        assert_eq!(t.classify(&s(0.7)), Label::Tourist);
        assert_eq!(t.classify(&s(0.5)), Label::Local);
    }

    fn oracle(node: &TreeNode, s: &Sample) -> Label {
        match node {
            TreeNode::Leaf { label } => *label,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let v = match feature {
                    TreeFeature::TouristRatio => s.tourist_ratio,
                    TreeFeature::UniqueUsersRatio => s.unique_users_ratio,
                };
                if v > *threshold {
                    oracle(right, s)
                } else {
                    oracle(left, s)
                }
            }
        }
    }

    #[test]
    fn descent_agrees_with_recursive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ex: Vec<LabeledExample> = (0..80)
            .map(|_| {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                let label = if (a > 0.5) ^ (b > 0.7) ^ rng.random_bool(0.1) {
                    Label::Tourist
                } else {
                    Label::Local
                };
                LabeledExample::new(a, b, label)
            })
            .collect();
        let params = TreeParams {
            prune: false,
            ..TreeParams::default()
        };
        let tree = train_tree(&ex, &params).unwrap();
        assert!(tree.depth() >= 2 && tree.depth() <= 3);
        for _ in 0..100 {
            let s = Sample {
                tourist_ratio: rng.random(),
                unique_users_ratio: rng.random(),
            };
            assert_eq!(tree.classify(&s), oracle(&tree.root, &s));
        }
    }

    #[test]
    fn pruning_drops_splits_that_isolate_a_noisy_example() {
        let mut ex = separable();
        ex[10].label = Label::Local;
        let unpruned = TreeParams {
            prune: false,
            min_leaf: 1,
            ..TreeParams::default()
        };
        assert!(train_tree(&ex, &unpruned).unwrap().depth() > 1);
        let tree = train_tree(&ex, &TreeParams::default()).unwrap();
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn added_errors_for_one_clean_case() {
        assert!((added_errors(1.0, 0.0) - 0.75).abs() < 1e-12);
        assert_eq!(added_errors(4.0, 4.0), 0.0);
    }

    #[test]
    fn training_is_deterministic() {
        let ex = separable();
        let a = train_tree(&ex, &TreeParams::default()).unwrap();
        let b = train_tree(&ex, &TreeParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gain_ratio_also_separates() {
        let params = TreeParams {
            criterion: SplitCriterion::GainRatio,
            ..TreeParams::default()
        };
        let ex = separable();
        let tree = train_tree(&ex, &params).unwrap();
        assert!(ex.iter().all(|e| tree.classify(&e.sample) == e.label));
    }

    #[test]
    fn cv_rejects_too_few_examples() {
        let ex = separable();
        assert!(cross_validate_tree(&ex[..5], 10, 1, &TreeParams::default()).is_err());
        let acc = cross_validate_tree(&ex, 10, 1, &TreeParams::default()).unwrap();
        assert_eq!(acc, 1.0);
    }
}
