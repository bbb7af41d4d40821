//! Per-user and per-venue features: locality tagging, venue metrics, busiest
//! hours, the local/tourist venue classifier, and the feature catalog that
//! feeds hotspot detection.

mod catalog;
mod locality;
mod temporal;
mod tree;

use std::collections::BTreeMap;
use std::path::Path;

use chrono::Timelike;
use serde::{Deserialize, Serialize};

pub use catalog::{build_catalog, FeatureCatalog, FeatureDef, FeatureKind};
pub use locality::{tag_user, tag_users, venue_metrics, Label, UserLocality, VenueMetrics, LOCAL_FRACTION};
pub use temporal::{
    busiest_hour, periods_of, GaussianKernel, PeriodTable, TemporalPeriod, TimeSeries24,
    MIN_TEMPORAL_CHECKINS,
};
pub use tree::{
    classify_venue, cross_validate_tree, train_tree, DecisionTree, LabeledExample, Sample,
    SplitCriterion, TreeFeature, TreeNode, TreeParams,
};

use crate::error::{Error, Result};
use crate::ingest::CityDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesConfig {
    #[serde(default)]
    pub periods: PeriodTable,
    #[serde(default)]
    pub kernel: GaussianKernel,
    #[serde(default)]
    pub tree: TreeParams,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub cv_seed: u64,
}

fn default_cv_folds() -> usize {
    10
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            periods: PeriodTable::default(),
            kernel: GaussianKernel::default(),
            tree: TreeParams::default(),
            cv_folds: default_cv_folds(),
            cv_seed: 0,
        }
    }
}

/// Everything derived for one city venue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueFeatures {
    pub venue_id: String,
    pub metrics: Option<VenueMetrics>,
    pub hours: TimeSeries24,
    pub busiest_hour: Option<u8>,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub tourist_examples: usize,
    pub local_examples: usize,
    pub cv_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub localities: BTreeMap<String, UserLocality>,
    pub venues: Vec<VenueFeatures>,
    pub tree: Option<DecisionTree>,
    pub training: TrainingSummary,
    pub catalog: FeatureCatalog,
}

/// Reads `labels.csv` (`venue_id,label`, label `tourist` or `local`).
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, Label>> {
    #[derive(Deserialize)]
    struct Row {
        venue_id: String,
        label: String,
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut out = BTreeMap::new();
    for rec in rdr.deserialize::<Row>() {
        let row = rec.map_err(|e| crate::ingest::csv_error(path, e))?;
        let label = Label::parse(&row.label).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: out.len() as u64 + 2,
            message: format!("unknown label `{}`", row.label),
        })?;
        out.insert(row.venue_id, label);
    }
    Ok(out)
}

/// Serializes labels in the `labels.csv` format, sorted by venue id.
pub fn labels_csv(labels: &BTreeMap<String, Label>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["venue_id", "label"]).expect("in-memory write");
    for (v, l) in labels {
        let l = match l {
            Label::Local => "local",
            Label::Tourist => "tourist",
        };
        w.write_record([v.as_str(), l]).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// Seed examples: labeled venues plus Home-category venues as locals.
pub fn training_examples(
    dataset: &CityDataset,
    venues: &[VenueFeatures],
    seed_labels: &BTreeMap<String, Label>,
) -> Vec<LabeledExample> {
    let homes = dataset.taxonomy.home_categories();
    let categories = dataset.venue_categories();
    let mut out = Vec::new();
    for (vi, vf) in venues.iter().enumerate() {
        let Some(m) = &vf.metrics else { continue };
        let label = seed_labels.get(&vf.venue_id).copied().or_else(|| {
            let is_home = dataset
                .taxonomy
                .ancestor_indices(categories[vi])
                .iter()
                .any(|a| homes.contains(a));
            is_home.then_some(Label::Local)
        });
        if let Some(label) = label {
            out.push(LabeledExample {
                sample: Sample::from(m),
                label,
            });
        }
    }
    out
}

/// Computes all venue features and the feature catalog for a city.
pub fn compute_features(
    dataset: &CityDataset,
    seed_labels: &BTreeMap<String, Label>,
    config: &FeaturesConfig,
) -> Result<FeatureSet> {
    config.periods.validate()?;
    let localities = tag_users(dataset);

    let mut users_by_venue: Vec<Vec<&str>> = vec![Vec::new(); dataset.venues.len()];
    let mut hours_by_venue = vec![TimeSeries24::default(); dataset.venues.len()];
    for c in &dataset.checkins {
        let vi = dataset.venue_index(&c.venue_id).expect("validated check-in");
        users_by_venue[vi].push(&c.user_id);
        hours_by_venue[vi].counts[c.timestamp.hour() as usize] += 1;
    }

    let mut venues: Vec<VenueFeatures> = dataset
        .venues
        .iter()
        .zip(users_by_venue.iter().zip(&hours_by_venue))
        .map(|(v, (users, hours))| VenueFeatures {
            venue_id: v.venue_id.clone(),
            metrics: venue_metrics(&v.venue_id, users.iter().copied(), &localities),
            hours: *hours,
            busiest_hour: busiest_hour(hours, &config.kernel).ok(),
            label: None,
        })
        .collect();

    let examples = training_examples(dataset, &venues, seed_labels);
    let tourist_examples = examples.iter().filter(|e| e.label == Label::Tourist).count();
    let local_examples = examples.len() - tourist_examples;
    let tree = if examples.is_empty() {
        log::warn!("no labeled venues; local/tourist features will be empty");
        None
    } else {
        Some(train_tree(&examples, &config.tree)?)
    };
    let cv_accuracy = if examples.len() >= config.cv_folds && config.cv_folds >= 2 {
        Some(cross_validate_tree(&examples, config.cv_folds, config.cv_seed, &config.tree)?)
    } else {
        None
    };

    if let Some(tree) = &tree {
        for vf in &mut venues {
            vf.label = vf.metrics.as_ref().map(|m| classify_venue(tree, m));
        }
    }

    let catalog = build_catalog(dataset, &venues, &config.periods);
    Ok(FeatureSet {
        localities,
        venues,
        tree,
        training: TrainingSummary {
            tourist_examples,
            local_examples,
            cv_accuracy,
        },
        catalog,
    })
}
