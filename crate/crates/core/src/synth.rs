//! Synthetic cities with planted neighborhoods.
//!
//! A spec plants discs of venues with a category mixture, a peak hour, a
//! resident population with themed profiles and a tourist share. Generation
//! is a single sequential ChaCha8 stream, so a spec always yields the same
//! bytes.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::boundaries::Neighborhood;
use crate::error::{Error, Result};
use crate::features::Label;
use crate::geo::{CellIndex, CityGrid, GeoPoint, PlanarPoint, DEFAULT_CELL_SIZE_M};
use crate::ingest::{CategoryTaxonomy, CheckIn, CityConfig, CityDataset, DataPaths, UserProfile, Venue};

const SHARE_TOLERANCE: f64 = 1e-6;
const OUTSIDE_VENUES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixShare {
    pub category_id: String,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscSpec {
    pub name: String,
    /// Center as meters east and north of the bbox south-west corner.
    pub center_m: [f64; 2],
    pub radius_m: f64,
    pub venues: usize,
    pub mix: Vec<MixShare>,
    pub checkins: usize,
    pub peak_hour: f64,
    #[serde(default = "default_hour_sd")]
    pub hour_sd: f64,
    /// Share of the disc's check-ins made by tourists.
    #[serde(default)]
    pub tourist_share: f64,
    /// Residents homed in this disc.
    #[serde(default)]
    pub residents: usize,
    /// Profile vocabulary of the residents.
    #[serde(default)]
    pub theme: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    #[serde(default)]
    pub venues_per_km2: f64,
    #[serde(default = "default_background_categories")]
    pub categories: Vec<String>,
    #[serde(default = "default_background_checkins")]
    pub checkins_per_venue: usize,
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        BackgroundSpec {
            venues_per_km2: 0.0,
            categories: default_background_categories(),
            checkins_per_venue: default_background_checkins(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    #[serde(default = "default_name")]
    pub name: String,
    /// South-west corner of the bbox.
    pub origin: GeoPoint,
    pub width_m: f64,
    pub height_m: f64,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
    #[serde(default = "default_start_date")]
    pub start_date: NaiveDate,
    #[serde(default = "default_days")]
    pub days: u32,
    pub discs: Vec<DiscSpec>,
    #[serde(default)]
    pub background: BackgroundSpec,
    #[serde(default)]
    pub tourists: usize,
    /// Minimum out-of-bbox check-ins per tourist; raised as needed so that
    /// every tourist keeps an outside majority.
    #[serde(default = "default_outside_checkins")]
    pub outside_checkins: usize,
    /// Share of a disc's resident check-ins made by residents of other discs.
    #[serde(default = "default_roaming")]
    pub roaming: f64,
    #[serde(default = "default_profile_terms")]
    pub profile_terms: usize,
    /// Probability that a profile term comes from the home theme rather than
    /// the generic vocabulary.
    #[serde(default = "default_purity")]
    pub profile_purity: f64,
    #[serde(default = "default_generic_terms")]
    pub generic_terms: Vec<String>,
    /// Share of venues with check-ins given a seed label.
    #[serde(default = "default_label_fraction")]
    pub label_fraction: f64,
}

fn default_hour_sd() -> f64 {
    1.0
}
fn default_background_categories() -> Vec<String> {
    ["office", "coffee_shop", "park", "post_office"].map(String::from).to_vec()
}
fn default_background_checkins() -> usize {
    2
}
fn default_name() -> String {
    "Synthetic City".into()
}
fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE_M
}
fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 5, 1).expect("valid date")
}
fn default_days() -> u32 {
    90
}
fn default_outside_checkins() -> usize {
    8
}
fn default_roaming() -> f64 {
    0.1
}
fn default_profile_terms() -> usize {
    6
}
fn default_purity() -> f64 {
    0.8
}
fn default_generic_terms() -> Vec<String> {
    [
        "life", "fan", "student", "lover", "dad", "mom", "friend", "world", "coffee", "travel", "sports",
        "family", "writer", "thinker", "human",
    ]
    .map(String::from)
    .to_vec()
}
fn default_label_fraction() -> f64 {
    0.2
}

impl SynthSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn grid(&self) -> Result<CityGrid> {
        CityGrid::from_extent(self.origin, self.width_m, self.height_m, self.cell_size_m)
    }

    pub fn validate(&self, taxonomy: &CategoryTaxonomy) -> Result<()> {
        let spec_err = |m: String| Err(Error::Spec(m));
        if !(self.width_m > 0.0 && self.height_m > 0.0) {
            return spec_err("bbox extent must be positive".into());
        }
        if self.days == 0 {
            return spec_err("days must be at least 1".into());
        }
        for (name, p) in [("roaming", self.roaming), ("profile_purity", self.profile_purity), ("label_fraction", self.label_fraction)] {
            if !(0.0..=1.0).contains(&p) {
                return spec_err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        let max_r = self.discs.iter().map(|d| d.radius_m).fold(0.0, f64::max);
        for (i, d) in self.discs.iter().enumerate() {
            if !(d.radius_m > 0.0) {
                return spec_err(format!("disc `{}` needs a positive radius", d.name));
            }
            let [x, y] = d.center_m;
            if x - d.radius_m < 0.0 || y - d.radius_m < 0.0 || x + d.radius_m > self.width_m || y + d.radius_m > self.height_m {
                return spec_err(format!("disc `{}` does not fit inside the bbox", d.name));
            }
            if d.mix.is_empty() {
                return spec_err(format!("disc `{}` has an empty category mix", d.name));
            }
            let total: f64 = d.mix.iter().map(|m| m.share).sum();
            if (total - 1.0).abs() > SHARE_TOLERANCE || d.mix.iter().any(|m| !(m.share >= 0.0)) {
                return spec_err(format!("disc `{}` shares sum to {total}, not 1", d.name));
            }
            for m in &d.mix {
                if !taxonomy.contains(&m.category_id) {
                    return Err(Error::UnknownCategory(m.category_id.clone()));
                }
            }
            if !(0.0..=1.0).contains(&d.tourist_share) {
                return spec_err(format!("disc `{}` tourist share must lie in [0, 1]", d.name));
            }
            if !(0.0..24.0).contains(&d.peak_hour) || !(d.hour_sd >= 0.0) {
                return spec_err(format!("disc `{}` has an invalid peak hour or spread", d.name));
            }
            if d.checkins > 0 && d.venues == 0 {
                return spec_err(format!("disc `{}` has check-ins but no venues", d.name));
            }
            if d.residents > 0 && d.theme.is_empty() {
                return spec_err(format!("disc `{}` has residents but no theme", d.name));
            }
            for e in &self.discs[..i] {
                let gap = ((x - e.center_m[0]).powi(2) + (y - e.center_m[1]).powi(2)).sqrt();
                if gap < 2.0 * max_r {
                    return spec_err(format!(
                        "discs `{}` and `{}` are {gap:.0} m apart, closer than twice the largest radius",
                        e.name, d.name
                    ));
                }
            }
        }
        if self.background.venues_per_km2 > 0.0 {
            if self.background.categories.is_empty() {
                return spec_err("background venues need at least one category".into());
            }
            for c in &self.background.categories {
                if !taxonomy.contains(c) {
                    return Err(Error::UnknownCategory(c.clone()));
                }
            }
        }
        if self.generic_terms.is_empty() && self.profile_purity < 1.0 {
            return spec_err("generic_terms is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedDisc {
    pub name: String,
    pub center: GeoPoint,
    pub radius_m: f64,
    /// Category with the largest share, first listed on ties.
    pub dominant_category: String,
    /// Cells whose centers lie inside the disc.
    pub cells: Vec<CellIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub discs: Vec<PlantedDisc>,
    /// Disc of every city venue; background venues map to `None`.
    pub venue_disc: BTreeMap<String, Option<usize>>,
    /// Home disc of every resident; tourists map to `None`.
    pub user_home: BTreeMap<String, Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct SynthCity {
    pub dataset: CityDataset,
    pub labels: BTreeMap<String, Label>,
    pub truth: GroundTruth,
}

impl SynthCity {
    /// Writes the ingest CSVs, `city.json`, `labels.csv` and `truth.json`.
    pub fn write_to(&self, dir: &Path) -> Result<DataPaths> {
        let paths = self.dataset.write_to(dir)?;
        let bytes = crate::features::labels_csv(&self.labels);
        crate::ingest::write_bytes(&dir.join("labels.csv"), &bytes)?;
        let truth = serde_json::to_vec_pretty(&self.truth).expect("truth serializes");
        crate::ingest::write_bytes(&dir.join("truth.json"), &truth)?;
        Ok(paths)
    }
}

fn disc_cells(grid: &CityGrid, center: &PlanarPoint, radius: f64) -> Vec<CellIndex> {
    grid.cells()
        .filter(|&c| grid.cell_center(c).distance(center) <= radius)
        .collect()
}

fn in_disc(rng: &mut ChaCha8Rng, center: &PlanarPoint, radius: f64) -> PlanarPoint {
    let r = radius * rng.random::<f64>().sqrt();
    let t = rng.random::<f64>() * std::f64::consts::TAU;
    PlanarPoint::new(center.x + r * t.cos(), center.y + r * t.sin())
}

struct Clock {
    start: NaiveDateTime,
    days: u32,
}

impl Clock {
    /// A timestamp whose hour follows a normal wrapped around the day.
    fn sample(&self, rng: &mut ChaCha8Rng, peak: f64, sd: f64) -> NaiveDateTime {
        let h = if sd > 0.0 {
            Normal::new(peak, sd).expect("valid spread").sample(rng)
        } else {
            peak
        };
        let secs = (h.rem_euclid(24.0) * 3600.0) as i64;
        let secs = secs.min(86_399);
        let day = rng.random_range(0..self.days) as i64;
        self.start + Duration::days(day) + Duration::seconds(secs)
    }
}

fn profile(rng: &mut ChaCha8Rng, theme: &[String], generic: &[String], n: usize, purity: f64) -> String {
    (0..n)
        .map(|_| {
            let pool = if theme.is_empty() || (rng.random::<f64>() >= purity && !generic.is_empty()) {
                generic
            } else {
                theme
            };
            pool[rng.random_range(0..pool.len())].as_str()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generates a city from a spec on the shipped taxonomy.
pub fn generate(spec: &SynthSpec) -> Result<SynthCity> {
    generate_with(spec, CategoryTaxonomy::sample())
}

pub fn generate_with(spec: &SynthSpec, taxonomy: CategoryTaxonomy) -> Result<SynthCity> {
    spec.validate(&taxonomy)?;
    let grid = spec.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let clock = Clock {
        start: spec.start_date.and_hms_opt(0, 0, 0).expect("midnight"),
        days: spec.days,
    };
    let geo = |p: &PlanarPoint| grid.unproject(p);

    let mut residents: Vec<Vec<String>> = Vec::with_capacity(spec.discs.len());
    let mut users = Vec::new();
    let mut user_home = BTreeMap::new();
    let mut next_user = 0usize;
    for (di, d) in spec.discs.iter().enumerate() {
        let mut ids = Vec::with_capacity(d.residents);
        for _ in 0..d.residents {
            let id = format!("u{next_user:05}");
            next_user += 1;
            users.push(UserProfile {
                user_id: id.clone(),
                profile_text: profile(&mut rng, &d.theme, &spec.generic_terms, spec.profile_terms, spec.profile_purity),
            });
            user_home.insert(id.clone(), Some(di));
            ids.push(id);
        }
        residents.push(ids);
    }
    let all_residents: Vec<&String> = residents.iter().flatten().collect();
    let tourists: Vec<String> = (0..spec.tourists).map(|i| format!("t{i:05}")).collect();
    for t in &tourists {
        users.push(UserProfile {
            user_id: t.clone(),
            profile_text: profile(&mut rng, &[], &spec.generic_terms, spec.profile_terms, 0.0),
        });
        user_home.insert(t.clone(), None);
    }

    let mut venues = Vec::new();
    let mut venue_disc = BTreeMap::new();
    let mut checkins = Vec::new();
    let mut tourist_hits: BTreeMap<String, (u32, u32)> = BTreeMap::new();
    let mut planted = Vec::with_capacity(spec.discs.len());
    for (di, d) in spec.discs.iter().enumerate() {
        let center = grid.at_offset(d.center_m[0], d.center_m[1]);
        let weights = WeightedIndex::new(d.mix.iter().map(|m| m.share)).map_err(|e| Error::Spec(e.to_string()))?;
        let first = venues.len();
        for k in 0..d.venues {
            let cat = &d.mix[weights.sample(&mut rng)].category_id;
            let id = format!("d{di}-v{k:04}");
            let name = taxonomy.get(cat).map_or(cat.as_str(), |c| c.name.as_str());
            venues.push(Venue {
                venue_id: id.clone(),
                name: format!("{name} {k}"),
                location: geo(&in_disc(&mut rng, &center, d.radius_m)),
                category_id: cat.clone(),
            });
            venue_disc.insert(id, Some(di));
        }
        for _ in 0..d.checkins {
            let vi = first + rng.random_range(0..d.venues);
            let user = if !tourists.is_empty() && rng.random::<f64>() < d.tourist_share {
                let t = tourists[rng.random_range(0..tourists.len())].clone();
                let e = tourist_hits.entry(venues[vi].venue_id.clone()).or_insert((0, 0));
                e.0 += 1;
                t
            } else if !all_residents.is_empty() && (residents[di].is_empty() || rng.random::<f64>() < spec.roaming) {
                all_residents[rng.random_range(0..all_residents.len())].clone()
            } else if !residents[di].is_empty() {
                residents[di][rng.random_range(0..residents[di].len())].clone()
            } else {
                continue;
            };
            tourist_hits.entry(venues[vi].venue_id.clone()).or_insert((0, 0)).1 += 1;
            checkins.push(CheckIn {
                user_id: user,
                venue_id: venues[vi].venue_id.clone(),
                timestamp: clock.sample(&mut rng, d.peak_hour, d.hour_sd),
            });
        }
        let dominant = d
            .mix
            .iter()
            .fold(&d.mix[0], |best, m| if m.share > best.share { m } else { best });
        planted.push(PlantedDisc {
            name: d.name.clone(),
            center: geo(&center),
            radius_m: d.radius_m,
            dominant_category: dominant.category_id.clone(),
            cells: disc_cells(&grid, &center, d.radius_m),
        });
    }

    let bg = &spec.background;
    let n_bg = (bg.venues_per_km2 * grid.area_km2()).round() as usize;
    for k in 0..n_bg {
        let p = grid.at_offset(rng.random::<f64>() * spec.width_m, rng.random::<f64>() * spec.height_m);
        let cat = bg.categories[rng.random_range(0..bg.categories.len())].clone();
        let id = format!("bg-v{k:05}");
        venues.push(Venue {
            venue_id: id.clone(),
            name: format!("Background {k}"),
            location: geo(&p),
            category_id: cat,
        });
        venue_disc.insert(id.clone(), None);
        for _ in 0..bg.checkins_per_venue {
            let Some(user) = all_residents.get(rng.random_range(0..all_residents.len().max(1))) else {
                break;
            };
            tourist_hits.entry(id.clone()).or_insert((0, 0)).1 += 1;
            checkins.push(CheckIn {
                user_id: (*user).clone(),
                venue_id: id.clone(),
                timestamp: clock.sample(&mut rng, 12.0, 4.0),
            });
        }
    }

    if !tourists.is_empty() {
        let south = spec.origin.lat - 0.05;
        let outside_cat = spec.discs.first().map_or_else(|| taxonomy.node(0).id.clone(), |d| d.mix[0].category_id.clone());
        let first = venues.len();
        for k in 0..OUTSIDE_VENUES {
            venues.push(Venue {
                venue_id: format!("out-v{k:03}"),
                name: format!("Elsewhere {k}"),
                location: GeoPoint::new(south - 0.002 * k as f64, spec.origin.lon + 0.002 * k as f64)?,
                category_id: outside_cat.clone(),
            });
        }
        let mut in_city: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &checkins {
            if c.user_id.starts_with('t') {
                *in_city.entry(c.user_id.as_str()).or_insert(0) += 1;
            }
        }
        let mut outside = Vec::new();
        for t in &tourists {
            let n = spec.outside_checkins.max(in_city.get(t.as_str()).copied().unwrap_or(0) + 1);
            for _ in 0..n {
                let vi = first + rng.random_range(0..OUTSIDE_VENUES);
                outside.push(CheckIn {
                    user_id: t.clone(),
                    venue_id: venues[vi].venue_id.clone(),
                    timestamp: clock.sample(&mut rng, 12.0, 4.0),
                });
            }
        }
        checkins.extend(outside);
    }

    let mut labels = BTreeMap::new();
    for (id, &(tourist, total)) in &tourist_hits {
        if total > 0 && rng.random::<f64>() < spec.label_fraction {
            let l = if 2 * tourist >= total { Label::Tourist } else { Label::Local };
            labels.insert(id.clone(), l);
        }
    }

    let config = CityConfig {
        name: spec.name.clone(),
        bbox: grid.bbox,
        cell_size_m: spec.cell_size_m,
    };
    let (dataset, _) = CityDataset::from_parts(&config, taxonomy, venues, checkins, users)?;
    Ok(SynthCity {
        dataset,
        labels,
        truth: GroundTruth {
            discs: planted,
            venue_disc,
            user_home,
        },
    })
}

/// `|a ∩ b| / |a ∪ b|` over cell sets; 0 when both are empty.
pub fn jaccard(a: &[CellIndex], b: &[CellIndex]) -> f64 {
    let a: std::collections::BTreeSet<_> = a.iter().collect();
    let b: std::collections::BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

/// Best Jaccard overlap of each planted disc with any detected neighborhood.
pub fn score_recovery(detected: &[Neighborhood], truth: &GroundTruth) -> Vec<f64> {
    truth
        .discs
        .iter()
        .map(|d| detected.iter().map(|n| jaccard(&d.cells, &n.cells)).fold(0.0, f64::max))
        .collect()
}

/// Index of the detected neighborhood overlapping each disc best, if any.
pub fn match_discs(detected: &[Neighborhood], truth: &GroundTruth) -> Vec<Option<usize>> {
    truth
        .discs
        .iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (i, n) in detected.iter().enumerate() {
                let j = jaccard(&d.cells, &n.cells);
                if j > 0.0 && best.is_none_or(|(_, b)| j > b) {
                    best = Some((i, j));
                }
            }
            best.map(|b| b.0)
        })
        .collect()
}
