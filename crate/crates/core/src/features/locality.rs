use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{BoundingBox, GeoPoint};
use crate::ingest::CityDataset;

/// Fraction of a user's check-ins that must fall inside the city for the
/// user to count as a local.
pub const LOCAL_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Local,
    Tourist,
}

impl Label {
    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "local" => Some(Label::Local),
            "tourist" | "touristic" => Some(Label::Tourist),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLocality {
    pub user_id: String,
    pub label: Label,
    pub in_city_fraction: f64,
}

/// Tags one user from the locations of all their check-ins, in the city and
/// elsewhere.
pub fn tag_user(user_id: &str, checkin_locations: &[GeoPoint], bbox: &BoundingBox) -> Result<UserLocality> {
    if checkin_locations.is_empty() {
        return Err(Error::UndefinedUser(user_id.to_string()));
    }
    let inside = checkin_locations.iter().filter(|p| bbox.contains(p)).count();
    let in_city_fraction = inside as f64 / checkin_locations.len() as f64;
    Ok(UserLocality {
        user_id: user_id.to_string(),
        label: if in_city_fraction >= LOCAL_FRACTION {
            Label::Local
        } else {
            Label::Tourist
        },
        in_city_fraction,
    })
}

/// Tags every user with at least one check-in in the dataset.
pub fn tag_users(dataset: &CityDataset) -> BTreeMap<String, UserLocality> {
    let mut inside: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &dataset.checkins {
        *inside.entry(&c.user_id).or_default() += 1;
        *total.entry(&c.user_id).or_default() += 1;
    }
    for c in &dataset.outside_checkins {
        *total.entry(&c.user_id).or_default() += 1;
    }
    total
        .into_iter()
        .map(|(user, n)| {
            let k = inside.get(user).copied().unwrap_or(0);
            let in_city_fraction = k as f64 / n as f64;
            let label = if in_city_fraction >= LOCAL_FRACTION {
                Label::Local
            } else {
                Label::Tourist
            };
            (
                user.to_string(),
                UserLocality {
                    user_id: user.to_string(),
                    label,
                    in_city_fraction,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueMetrics {
    pub venue_id: String,
    pub tourist_ratio: f64,
    pub unique_users_ratio: f64,
    pub checkin_count: u32,
}

/// Tourist share of distinct visitors and distinct-visitor share of
/// check-ins for one venue. Users missing from `localities` count as locals.
pub fn venue_metrics<'a, I>(venue_id: &str, checkin_users: I, localities: &BTreeMap<String, UserLocality>) -> Option<VenueMetrics>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut users = BTreeSet::new();
    let mut count = 0u32;
    for u in checkin_users {
        users.insert(u);
        count += 1;
    }
    if count == 0 {
        return None;
    }
    let tourists = users
        .iter()
        .filter(|u| {
            localities
                .get(**u)
                .map(|l| l.label == Label::Tourist)
                .unwrap_or(false)
        })
        .count();
    Some(VenueMetrics {
        venue_id: venue_id.to_string(),
        tourist_ratio: tourists as f64 / users.len() as f64,
        unique_users_ratio: users.len() as f64 / count as f64,
        checkin_count: count,
    })
}
