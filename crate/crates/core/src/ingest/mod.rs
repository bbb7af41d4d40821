//! Loading and validating a city's check-in dataset.
//!
//! File formats (UTF-8 CSV with a header row):
//!
//! * `venues.csv`: `venue_id,name,lat,lon,category_id`
//! * `checkins.csv`: `user_id,venue_id,timestamp` (`YYYY-MM-DDTHH:MM:SS`, local time)
//! * `users.csv`: `user_id,profile_text`
//! * `taxonomy.csv`: `category_id,parent_id,name`
//! * city config (JSON): `{name, bbox: {south, west, north, east}, cell_size_m}`
//!
//! Venues outside the city bbox are kept apart from the city venues; their
//! check-ins only count towards user locality tagging.

mod taxonomy;

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{BoundingBox, GeoPoint, DEFAULT_CELL_SIZE_M};

pub use taxonomy::{Category, CategoryTaxonomy};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Venue {
    pub venue_id: String,
    pub name: String,
    pub location: GeoPoint,
    pub category_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CheckIn {
    pub user_id: String,
    pub venue_id: String,
    pub timestamp: NaiveDateTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub profile_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityConfig {
    pub name: String,
    pub bbox: BoundingBox,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
}

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE_M
}

impl CityConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: CityConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.bbox.validate()?;
        if !(cfg.cell_size_m > 0.0) {
            return Err(Error::Config(format!("{}: cell_size_m must be positive", path.display())));
        }
        Ok(cfg)
    }
}

/// Locations of the four data files of a city.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPaths {
    pub venues: PathBuf,
    pub checkins: PathBuf,
    pub users: PathBuf,
    pub taxonomy: PathBuf,
}

impl DataPaths {
    /// The conventional file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        DataPaths {
            venues: dir.join("venues.csv"),
            checkins: dir.join("checkins.csv"),
            users: dir.join("users.csv"),
            taxonomy: dir.join("taxonomy.csv"),
        }
    }
}

/// Row accounting for one load.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub venue_rows: usize,
    pub venues_outside_bbox: usize,
    pub checkin_rows: usize,
    pub checkins_outside_bbox: usize,
    /// Check-ins whose venue id is not in the venue catalog.
    pub checkins_dropped: usize,
    pub user_rows: usize,
}

/// Validated, immutable check-in dataset of one city.
#[derive(Debug, Clone)]
pub struct CityDataset {
    pub name: String,
    pub bbox: BoundingBox,
    pub cell_size_m: f64,
    pub taxonomy: CategoryTaxonomy,
    pub venues: Vec<Venue>,
    pub checkins: Vec<CheckIn>,
    /// Venues outside the city bbox, visited by the city's users elsewhere.
    pub outside_venues: Vec<Venue>,
    pub outside_checkins: Vec<CheckIn>,
    pub users: Vec<UserProfile>,
    venue_index: HashMap<String, usize>,
}

impl CityDataset {
    /// Assembles a dataset from parts, splitting venues by the bbox and
    /// dropping check-ins to unknown venues.
    pub fn from_parts(
        config: &CityConfig,
        taxonomy: CategoryTaxonomy,
        venues: Vec<Venue>,
        checkins: Vec<CheckIn>,
        users: Vec<UserProfile>,
    ) -> Result<(Self, LoadReport)> {
        config.bbox.validate()?;
        let mut report = LoadReport {
            venue_rows: venues.len(),
            checkin_rows: checkins.len(),
            user_rows: users.len(),
            ..LoadReport::default()
        };

        let mut seen = HashMap::with_capacity(venues.len());
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for v in venues {
            if !taxonomy.contains(&v.category_id) {
                return Err(Error::Integrity(format!(
                    "venue `{}` has unknown category `{}`",
                    v.venue_id, v.category_id
                )));
            }
            if seen.insert(v.venue_id.clone(), ()).is_some() {
                return Err(Error::Integrity(format!("duplicate venue id `{}`", v.venue_id)));
            }
            if config.bbox.contains(&v.location) {
                inside.push(v);
            } else {
                outside.push(v);
            }
        }
        report.venues_outside_bbox = outside.len();

        let venue_index: HashMap<String, usize> = inside
            .iter()
            .enumerate()
            .map(|(i, v)| (v.venue_id.clone(), i))
            .collect();
        let outside_ids: HashMap<&str, ()> =
            outside.iter().map(|v| (v.venue_id.as_str(), ())).collect();

        let mut city_checkins = Vec::with_capacity(checkins.len());
        let mut outside_checkins = Vec::new();
        for c in checkins {
            if venue_index.contains_key(&c.venue_id) {
                city_checkins.push(c);
            } else if outside_ids.contains_key(c.venue_id.as_str()) {
                outside_checkins.push(c);
            } else {
                report.checkins_dropped += 1;
            }
        }
        report.checkins_outside_bbox = outside_checkins.len();

        if report.venues_outside_bbox > 0 {
            log::warn!(
                "{}: {} venues outside the bbox kept for locality tagging only",
                config.name,
                report.venues_outside_bbox
            );
        }
        if report.checkins_dropped > 0 {
            log::warn!(
                "{}: dropped {} check-ins referencing unknown venues",
                config.name,
                report.checkins_dropped
            );
        }

        let mut user_seen = HashMap::with_capacity(users.len());
        for u in &users {
            if user_seen.insert(u.user_id.as_str(), ()).is_some() {
                return Err(Error::Integrity(format!("duplicate user id `{}`", u.user_id)));
            }
        }

        Ok((
            CityDataset {
                name: config.name.clone(),
                bbox: config.bbox,
                cell_size_m: config.cell_size_m,
                taxonomy,
                venues: inside,
                checkins: city_checkins,
                outside_venues: outside,
                outside_checkins,
                users,
                venue_index,
            },
            report,
        ))
    }

    pub fn config(&self) -> CityConfig {
        CityConfig {
            name: self.name.clone(),
            bbox: self.bbox,
            cell_size_m: self.cell_size_m,
        }
    }

    pub fn venue_index(&self, venue_id: &str) -> Option<usize> {
        self.venue_index.get(venue_id).copied()
    }

    pub fn venue(&self, venue_id: &str) -> Option<&Venue> {
        self.venue_index(venue_id).map(|i| &self.venues[i])
    }

    /// Taxonomy node index of every city venue, in venue order.
    pub fn venue_categories(&self) -> Vec<usize> {
        self.venues
            .iter()
            .map(|v| self.taxonomy.index_of(&v.category_id).expect("validated category"))
            .collect()
    }

    /// Writes the dataset back in the ingest formats.
    pub fn write_to(&self, dir: &Path) -> Result<DataPaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = DataPaths::in_dir(dir);

        let mut venues = csv::Writer::from_writer(Vec::new());
        for v in self.venues.iter().chain(&self.outside_venues) {
            venues
                .serialize(VenueRow::from(v))
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        write_bytes(&paths.venues, &finish(venues)?)?;

        let mut checkins = csv::Writer::from_writer(Vec::new());
        for c in self.checkins.iter().chain(&self.outside_checkins) {
            checkins
                .serialize(CheckInRow::from(c))
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        write_bytes(&paths.checkins, &finish(checkins)?)?;

        let mut users = csv::Writer::from_writer(Vec::new());
        for u in &self.users {
            users.serialize(u).map_err(|e| Error::Data(e.to_string()))?;
        }
        write_bytes(&paths.users, &finish(users)?)?;

        write_bytes(&paths.taxonomy, &self.taxonomy.to_csv()?)?;

        let cfg = serde_json::to_vec_pretty(&self.config()).expect("config serializes");
        write_bytes(&dir.join("city.json"), &cfg)?;
        Ok(paths)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let message = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    };
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct VenueRow {
    venue_id: String,
    name: String,
    lat: f64,
    lon: f64,
    category_id: String,
}

impl From<&Venue> for VenueRow {
    fn from(v: &Venue) -> Self {
        VenueRow {
            venue_id: v.venue_id.clone(),
            name: v.name.clone(),
            lat: v.location.lat,
            lon: v.location.lon,
            category_id: v.category_id.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckInRow {
    user_id: String,
    venue_id: String,
    timestamp: String,
}

impl From<&CheckIn> for CheckInRow {
    fn from(c: &CheckIn) -> Self {
        CheckInRow {
            user_id: c.user_id.clone(),
            venue_id: c.venue_id.clone(),
            timestamp: c.timestamp.format(TIMESTAMP_FORMAT).to_string(),
        }
    }
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn line_of(rdr: &csv::StringRecord) -> u64 {
    rdr.position().map(|p| p.line()).unwrap_or(0)
}

pub fn read_venues<R: Read>(reader: R, path: &Path) -> Result<Vec<Venue>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec);
        let row: VenueRow = rec
            .deserialize(Some(&headers))
            .map_err(|e| csv_error(path, e))?;
        let location = GeoPoint::new(row.lat, row.lon)
            .map_err(|e| parse_error(path, line, e.to_string()))?;
        out.push(Venue {
            venue_id: row.venue_id,
            name: row.name,
            location,
            category_id: row.category_id,
        });
    }
    Ok(out)
}

pub fn read_checkins<R: Read>(reader: R, path: &Path) -> Result<Vec<CheckIn>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec);
        let row: CheckInRow = rec
            .deserialize(Some(&headers))
            .map_err(|e| csv_error(path, e))?;
        let timestamp = NaiveDateTime::parse_from_str(&row.timestamp, TIMESTAMP_FORMAT)
            .map_err(|e| parse_error(path, line, format!("bad timestamp `{}`: {e}", row.timestamp)))?;
        out.push(CheckIn {
            user_id: row.user_id,
            venue_id: row.venue_id,
            timestamp,
        });
    }
    Ok(out)
}

pub fn read_users<R: Read>(reader: R, path: &Path) -> Result<Vec<UserProfile>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<UserProfile>() {
        out.push(rec.map_err(|e| csv_error(path, e))?);
    }
    Ok(out)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

/// Loads and validates a city from its config and data files.
pub fn load_city(config_path: &Path, paths: &DataPaths) -> Result<(CityDataset, LoadReport)> {
    let config = CityConfig::load(config_path)?;
    let taxonomy = CategoryTaxonomy::load(&paths.taxonomy)?;
    let venues = read_venues(open(&paths.venues)?, &paths.venues)?;
    let checkins = read_checkins(open(&paths.checkins)?, &paths.checkins)?;
    let users = read_users(open(&paths.users)?, &paths.users)?;
    CityDataset::from_parts(&config, taxonomy, venues, checkins, users)
}

/// Share of city venues, and of city check-ins, that fall in `category`
/// (directly or through a descendant category).
pub fn category_share(dataset: &CityDataset, category: &str) -> (f64, f64) {
    let Some(target) = dataset.taxonomy.index_of(category) else {
        return (0.0, 0.0);
    };
    let member: Vec<bool> = dataset
        .venue_categories()
        .into_iter()
        .map(|c| dataset.taxonomy.ancestor_indices(c).contains(&target))
        .collect();
    let venue_share = if dataset.venues.is_empty() {
        0.0
    } else {
        member.iter().filter(|m| **m).count() as f64 / dataset.venues.len() as f64
    };
    let checkin_share = if dataset.checkins.is_empty() {
        0.0
    } else {
        let hits = dataset
            .checkins
            .iter()
            .filter(|c| dataset.venue_index(&c.venue_id).map(|i| member[i]).unwrap_or(false))
            .count();
        hits as f64 / dataset.checkins.len() as f64
    };
    (venue_share, checkin_share)
}
