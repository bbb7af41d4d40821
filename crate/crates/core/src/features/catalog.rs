use serde::{Deserialize, Serialize};

use super::locality::Label;
use super::temporal::PeriodTable;
use super::VenueFeatures;
use crate::ingest::CityDataset;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    PlaceType,
    Time,
    Locality,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    /// Stable key: `place:<category_id>`, `time:<period>`, `local` or `tourist`.
    pub key: String,
    pub name: String,
    pub kind: FeatureKind,
}

/// Ordered feature dimensions with the city venues belonging to each.
///
/// Order: one place-type feature per taxonomy node (file order), then the
/// time periods selected for the catalog, then `local` and `tourist`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub features: Vec<FeatureDef>,
    /// Venue indices (into `CityDataset::venues`) per feature, ascending.
    pub members: Vec<Vec<u32>>,
}

impl FeatureCatalog {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.features.iter().position(|f| f.key == key)
    }

    pub fn place_key(category_id: &str) -> String {
        format!("place:{category_id}")
    }

    pub fn time_key(period: &str) -> String {
        format!("time:{period}")
    }

    pub fn n_place_types(&self) -> usize {
        self.features.iter().filter(|f| f.kind == FeatureKind::PlaceType).count()
    }
}

/// Assigns venues to features: place types through ancestor expansion, time
/// features through the busiest-hour periods, locality through the venue
/// classifier's label.
pub fn build_catalog(dataset: &CityDataset, venues: &[VenueFeatures], periods: &PeriodTable) -> FeatureCatalog {
    let tax = &dataset.taxonomy;
    let mut features: Vec<FeatureDef> = tax
        .nodes()
        .iter()
        .map(|n| FeatureDef {
            key: FeatureCatalog::place_key(&n.id),
            name: n.name.clone(),
            kind: FeatureKind::PlaceType,
        })
        .collect();
    let time_periods = periods.feature_periods();
    let time_base = features.len();
    for &p in &time_periods {
        let name = &periods.periods[p].name;
        features.push(FeatureDef {
            key: FeatureCatalog::time_key(name),
            name: name.clone(),
            kind: FeatureKind::Time,
        });
    }
    let local = features.len();
    features.push(FeatureDef {
        key: "local".into(),
        name: "Local".into(),
        kind: FeatureKind::Locality,
    });
    features.push(FeatureDef {
        key: "tourist".into(),
        name: "Tourist".into(),
        kind: FeatureKind::Locality,
    });

    let mut members = vec![Vec::new(); features.len()];
    let categories = dataset.venue_categories();
    for (vi, cat) in categories.into_iter().enumerate() {
        for a in tax.ancestor_indices(cat) {
            members[a].push(vi as u32);
        }
        let Some(vf) = venues.get(vi) else { continue };
        if let Some(hour) = vf.busiest_hour {
            for (slot, &p) in time_periods.iter().enumerate() {
                if periods.periods[p].contains(hour) {
                    members[time_base + slot].push(vi as u32);
                }
            }
        }
        match vf.label {
            Some(Label::Local) => members[local].push(vi as u32),
            Some(Label::Tourist) => members[local + 1].push(vi as u32),
            None => {}
        }
    }
    for m in &mut members {
        m.sort_unstable();
    }
    FeatureCatalog { features, members }
}
