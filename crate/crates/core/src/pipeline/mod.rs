//! Stage orchestration with file-based handoff.
//!
//! Every stage reads the artifacts of its prerequisites from the output
//! directory and writes its own under `<out>/<stage>/`. `manifest.json`
//! records, per stage, a hash of the configuration that produced it (chained
//! through its prerequisites) and the hashes of its inputs and outputs, so a
//! stage refuses to consume missing or stale upstream artifacts.

mod config;
pub mod export;
mod manifest;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub use config::{ExternalBoundaries, HIndexConfig, Overrides, PipelineConfig, RecommendConfig};
pub use manifest::{hash_file, sha256_hex, write_atomic, Manifest, OutputLock, StageRecord, LOCK_FILE, MANIFEST_FILE};

use crate::boundaries::{cells_csv, find_boundaries, neighborhood_stats, BoundaryResult, NeighborhoodStats};
use crate::error::{Error, Result};
use crate::features::{compute_features, labels_csv, read_labels, FeatureSet};
use crate::geo::CityGrid;
use crate::homogeneity::{h_index_map, heatmap_csv, heatmap_pgm, HIndexMap};
use crate::hotspots::{build_hotspots, vectorize_cells, venue_points, CellVectorField, Hotspot};
use crate::ingest::{load_city, CityDataset, DataPaths};
use crate::recommend::{cross_validate, eval_users, BoundarySet, EvalReport, Tokenizer};
use crate::synth::{generate, SynthSpec};

/// Caps intra-stage parallelism.
pub const THREADS_ENV: &str = "HOODMINE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Synth,
    Ingest,
    Features,
    Hotspots,
    Hindex,
    Neighborhoods,
    Recommend,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Features,
        Stage::Hotspots,
        Stage::Hindex,
        Stage::Neighborhoods,
        Stage::Recommend,
        Stage::Export,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::Hotspots => "hotspots",
            Stage::Hindex => "hindex",
            Stage::Neighborhoods => "neighborhoods",
            Stage::Recommend => "recommend",
            Stage::Export => "export",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }

    /// Stages whose artifacts this one reads directly.
    pub fn prerequisites(self, cfg: &PipelineConfig) -> Vec<Stage> {
        match self {
            Stage::Synth => vec![],
            Stage::Ingest if cfg.reads_synth() => vec![Stage::Synth],
            Stage::Ingest => vec![],
            Stage::Features => vec![Stage::Ingest],
            Stage::Hotspots => vec![Stage::Ingest, Stage::Features],
            Stage::Hindex => vec![Stage::Ingest, Stage::Hotspots],
            Stage::Neighborhoods => vec![Stage::Ingest, Stage::Hindex],
            Stage::Recommend => vec![Stage::Ingest, Stage::Neighborhoods],
            Stage::Export => vec![Stage::Ingest, Stage::Hotspots, Stage::Neighborhoods],
        }
    }

    /// All transitive prerequisites, in pipeline order.
    pub fn upstream(self, cfg: &PipelineConfig) -> Vec<Stage> {
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = self.prerequisites(cfg);
        while let Some(s) = stack.pop() {
            if seen.insert(s) {
                stack.extend(s.prerequisites(cfg));
            }
        }
        seen.into_iter().collect()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PipelineConfig {
    /// Ingest reads the synthetic city when no real city is configured.
    pub fn reads_synth(&self) -> bool {
        self.city.is_none() && self.synth.is_some()
    }

    /// Stages `all` runs, in order.
    pub fn stages(&self) -> Vec<Stage> {
        Stage::ALL
            .into_iter()
            .filter(|&s| s != Stage::Synth || self.synth.is_some())
            .collect()
    }
}

/// Worker pool sized by `HOODMINE_THREADS`, if set.
pub fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))
}

fn v<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("config serializes")
}

/// Runs one stage against its configured output directory.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<StageRecord> {
    Pipeline::new(cfg.clone())?.run(stage)
}

pub struct Pipeline {
    cfg: PipelineConfig,
}

struct Outputs {
    files: Vec<String>,
    summary: Value,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Pipeline { cfg })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.out_dir
    }

    pub fn run(&self, stage: Stage) -> Result<StageRecord> {
        let _lock = OutputLock::acquire(self.out_dir())?;
        self.in_pool(|| self.run_unlocked(stage))
    }

    /// Runs every configured stage in order.
    pub fn run_all(&self) -> Result<Vec<(Stage, StageRecord)>> {
        let _lock = OutputLock::acquire(self.out_dir())?;
        self.in_pool(|| {
            self.cfg
                .stages()
                .into_iter()
                .map(|s| self.run_unlocked(s).map(|r| (s, r)))
                .collect()
        })
    }

    fn in_pool<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        match thread_pool()? {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    fn run_unlocked(&self, stage: Stage) -> Result<StageRecord> {
        let mut manifest = Manifest::load(self.out_dir())?;
        self.check_upstream(stage, &manifest)?;
        log::info!("running stage {stage}");

        let dir = self.stage_dir(stage);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let mut inputs = self.external_inputs(stage)?;
        for p in stage.prerequisites(&self.cfg) {
            for (path, hash) in &manifest.stages[p.name()].outputs {
                inputs.insert(path.clone(), hash.clone());
            }
        }
        let out = match stage {
            Stage::Synth => self.synth(),
            Stage::Ingest => self.ingest(),
            Stage::Features => self.features(),
            Stage::Hotspots => self.hotspots(),
            Stage::Hindex => self.hindex(),
            Stage::Neighborhoods => self.neighborhoods(),
            Stage::Recommend => self.recommend(),
            Stage::Export => self.export(),
        }?;
        let mut outputs = BTreeMap::new();
        for rel in out.files {
            let hash = hash_file(&self.out_dir().join(&rel))?;
            outputs.insert(rel, hash);
        }
        let record = StageRecord {
            config_hash: self.config_hash(stage)?,
            inputs,
            outputs,
            summary: out.summary,
        };
        manifest.stages.insert(stage.name().to_string(), record.clone());
        manifest.save(self.out_dir())?;
        Ok(record)
    }

    fn check_upstream(&self, stage: Stage, manifest: &Manifest) -> Result<()> {
        for up in stage.upstream(&self.cfg) {
            let dep = || Error::Dependency {
                stage: up.name().to_string(),
            };
            let rec = manifest.stages.get(up.name()).ok_or_else(dep)?;
            if rec.config_hash != self.config_hash(up)? {
                return Err(Error::StaleCache {
                    stage: up.name().to_string(),
                });
            }
            for (rel, hash) in &rec.outputs {
                let path = self.out_dir().join(rel);
                if !path.is_file() {
                    return Err(dep());
                }
                if &hash_file(&path)? != hash {
                    log::warn!("{rel} was modified after the {up} stage wrote it; using it as is");
                }
            }
        }
        Ok(())
    }

    fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.out_dir().join(stage.name())
    }

    /// Hash of the stage's own configuration section chained with the
    /// hashes of its prerequisites.
    pub fn config_hash(&self, stage: Stage) -> Result<String> {
        let upstream: Vec<String> = stage
            .prerequisites(&self.cfg)
            .into_iter()
            .map(|p| self.config_hash(p))
            .collect::<Result<_>>()?;
        let doc = json!({
            "stage": stage.name(),
            "config": self.section(stage)?,
            "external": self.external_inputs(stage)?,
            "upstream": upstream,
        });
        Ok(sha256_hex(&serde_json::to_vec(&doc).expect("json value serializes")))
    }

    fn section(&self, stage: Stage) -> Result<Value> {
        let c = &self.cfg;
        Ok(match stage {
            Stage::Synth => json!({"seed": c.synth_seed}),
            Stage::Ingest => json!({"source": if c.reads_synth() { "synth" } else { "city" }}),
            Stage::Features => v(&c.features),
            Stage::Hotspots => v(&c.hotspots),
            Stage::Hindex => json!({"params": v(&c.hindex.params()), "label": c.hindex.label()}),
            Stage::Neighborhoods => v(&c.boundaries),
            Stage::Recommend => json!({
                "eval": v(&c.recommend.eval),
                "baseline_width_m": c.recommend.baseline_width_m,
                "external": c.recommend.external.iter().map(|e| e.label.clone()).collect::<Vec<_>>(),
                "label": c.hindex.label(),
            }),
            Stage::Export => json!({"baseline_width_m": c.recommend.baseline_width_m}),
        })
    }

    /// Files from outside the output directory that a stage reads, keyed by
    /// role.
    fn external_inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        let c = &self.cfg;
        match stage {
            Stage::Synth => {
                let spec = c.synth.as_ref().ok_or_else(|| Error::Config("no `synth` spec configured".into()))?;
                out.insert("synth_spec".into(), hash_file(spec)?);
            }
            Stage::Ingest if !c.reads_synth() => {
                let (city, paths, labels) = self.city_sources()?;
                out.insert("city".into(), hash_file(&city)?);
                out.insert("venues".into(), hash_file(&paths.venues)?);
                out.insert("checkins".into(), hash_file(&paths.checkins)?);
                out.insert("users".into(), hash_file(&paths.users)?);
                out.insert("taxonomy".into(), hash_file(&paths.taxonomy)?);
                if let Some(l) = labels {
                    out.insert("labels".into(), hash_file(&l)?);
                }
            }
            Stage::Recommend => {
                if let Some(s) = &c.recommend.stopwords {
                    out.insert("stopwords".into(), hash_file(s)?);
                }
                for e in &c.recommend.external {
                    out.insert(format!("external:{}", e.label), hash_file(&e.path)?);
                }
            }
            _ => {}
        }
        Ok(out)
    }

    fn city_sources(&self) -> Result<(PathBuf, DataPaths, Option<PathBuf>)> {
        let c = &self.cfg;
        let (city, data_dir) = if c.reads_synth() {
            let d = self.stage_dir(Stage::Synth);
            (d.join("city.json"), d)
        } else {
            let city = c.city.clone().ok_or_else(|| Error::Config("no `city` configured".into()))?;
            let dir = c
                .data_dir
                .clone()
                .unwrap_or_else(|| city.parent().map(Path::to_path_buf).unwrap_or_default());
            (city, dir)
        };
        let labels = match &c.labels {
            Some(l) if !c.reads_synth() => Some(l.clone()),
            _ => Some(data_dir.join("labels.csv")).filter(|p| p.is_file()),
        };
        Ok((city, DataPaths::in_dir(&data_dir), labels))
    }

    fn write(&self, stage: Stage, name: &str, bytes: &[u8]) -> Result<String> {
        let rel = format!("{}/{name}", stage.name());
        write_atomic(&self.out_dir().join(&rel), bytes)?;
        Ok(rel)
    }

    fn write_json<T: serde::Serialize>(&self, stage: Stage, name: &str, value: &T) -> Result<String> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Data(format!("{name}: {e}")))?;
        bytes.push(b'\n');
        self.write(stage, name, &bytes)
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, rel: &str) -> Result<T> {
        let path = self.out_dir().join(rel);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::json(&path, e))
    }

    /// The normalized dataset written by `ingest`.
    pub fn dataset(&self) -> Result<(CityDataset, CityGrid)> {
        let dir = self.stage_dir(Stage::Ingest);
        let (ds, _) = load_city(&dir.join("city.json"), &DataPaths::in_dir(&dir))?;
        let grid = CityGrid::new(ds.bbox, ds.cell_size_m)?;
        Ok((ds, grid))
    }

    fn synth(&self) -> Result<Outputs> {
        let path = self.cfg.synth.as_ref().expect("checked by external_inputs");
        let mut spec = SynthSpec::load(path)?;
        if let Some(seed) = self.cfg.synth_seed {
            spec.seed = seed;
        }
        let city = generate(&spec)?;
        city.write_to(&self.stage_dir(Stage::Synth))?;
        let files = ["venues.csv", "checkins.csv", "users.csv", "taxonomy.csv", "city.json", "labels.csv", "truth.json"]
            .map(|f| format!("synth/{f}"))
            .to_vec();
        Ok(Outputs {
            files,
            summary: json!({
                "seed": spec.seed,
                "discs": city.truth.discs.len(),
                "venues": city.dataset.venues.len(),
                "checkins": city.dataset.checkins.len(),
                "users": city.dataset.users.len(),
            }),
        })
    }

    fn ingest(&self) -> Result<Outputs> {
        let (city, paths, labels_path) = self.city_sources()?;
        let (ds, report) = load_city(&city, &paths)?;
        let labels = match &labels_path {
            Some(p) => read_labels(p)?,
            None => BTreeMap::new(),
        };
        let dir = self.stage_dir(Stage::Ingest);
        ds.write_to(&dir)?;
        let mut files: Vec<String> = ["venues.csv", "checkins.csv", "users.csv", "taxonomy.csv", "city.json"]
            .map(|f| format!("ingest/{f}"))
            .to_vec();
        files.push(self.write(Stage::Ingest, "labels.csv", &labels_csv(&labels))?);
        files.push(self.write_json(Stage::Ingest, "report.json", &report)?);
        log::info!(
            "{}: {} venues, {} check-ins, {} users",
            ds.name,
            ds.venues.len(),
            ds.checkins.len(),
            ds.users.len()
        );
        Ok(Outputs {
            files,
            summary: json!({
                "city": ds.name,
                "venues": ds.venues.len(),
                "outside_venues": ds.outside_venues.len(),
                "checkins": ds.checkins.len(),
                "users": ds.users.len(),
                "labels": labels.len(),
                "checkins_dropped": report.checkins_dropped,
            }),
        })
    }

    fn features(&self) -> Result<Outputs> {
        let (ds, _) = self.dataset()?;
        let labels = read_labels(&self.stage_dir(Stage::Ingest).join("labels.csv"))?;
        let fs = compute_features(&ds, &labels, &self.cfg.features)?;
        let files = vec![self.write_json(Stage::Features, "features.json", &fs)?];
        Ok(Outputs {
            files,
            summary: json!({
                "dim": fs.catalog.dim(),
                "place_types": fs.catalog.n_place_types(),
                "classifier": fs.tree.is_some(),
                "cv_accuracy": fs.training.cv_accuracy,
                "tourist_examples": fs.training.tourist_examples,
                "local_examples": fs.training.local_examples,
            }),
        })
    }

    fn hotspots(&self) -> Result<Outputs> {
        let (ds, grid) = self.dataset()?;
        let fs: FeatureSet = self.read_json("features/features.json")?;
        let points = venue_points(&ds, &grid)?;
        let hotspots = build_hotspots(&fs.catalog, &points, &self.cfg.hotspots);
        let field = vectorize_cells(&hotspots, &grid, fs.catalog.dim());
        let features: std::collections::BTreeSet<usize> = hotspots.iter().map(|h| h.feature_id).collect();
        let covered = field.vectors.iter().filter(|v| !v.is_zero()).count();
        let files = vec![
            self.write_json(Stage::Hotspots, "hotspots.json", &hotspots)?,
            self.write_json(Stage::Hotspots, "cell_vectors.json", &field)?,
        ];
        Ok(Outputs {
            files,
            summary: json!({
                "hotspots": hotspots.len(),
                "features_with_hotspots": features.len(),
                "covered_cells": covered,
            }),
        })
    }

    fn hindex(&self) -> Result<Outputs> {
        let (_, grid) = self.dataset()?;
        let field: CellVectorField = self.read_json("hotspots/cell_vectors.json")?;
        if (field.n_rows, field.n_cols) != (grid.n_rows, grid.n_cols) {
            return Err(Error::Data(format!(
                "cell vectors are {}x{} but the city grid is {}x{}",
                field.n_rows, field.n_cols, grid.n_rows, grid.n_cols
            )));
        }
        let map = h_index_map(&field, &grid, &self.cfg.hindex.params())?;
        let mean = if map.is_empty() {
            0.0
        } else {
            map.values.iter().sum::<f64>() / map.len() as f64
        };
        let files = vec![
            self.write_json(Stage::Hindex, "hindex.json", &map)?,
            self.write(Stage::Hindex, "heatmap.csv", heatmap_csv(&map, &grid).as_bytes())?,
            self.write(Stage::Hindex, "heatmap.pgm", &heatmap_pgm(&map))?,
        ];
        Ok(Outputs {
            files,
            summary: json!({
                "radius_m": map.radius_m,
                "measure": map.measure.name(),
                "max": map.max(),
                "mean": mean,
            }),
        })
    }

    fn neighborhoods(&self) -> Result<Outputs> {
        let (ds, grid) = self.dataset()?;
        let map: HIndexMap = self.read_json("hindex/hindex.json")?;
        let result = find_boundaries(&map, &grid, &self.cfg.boundaries)?;
        let points = venue_points(&ds, &grid)?;
        let stats: Vec<NeighborhoodStats> = result
            .neighborhoods
            .iter()
            .map(|n| neighborhood_stats(n, &ds, &points))
            .collect();
        let files = vec![
            self.write_json(Stage::Neighborhoods, "neighborhoods.json", &result)?,
            self.write(Stage::Neighborhoods, "cells.csv", cells_csv(&result.neighborhoods).as_bytes())?,
            self.write_json(Stage::Neighborhoods, "stats.json", &stats)?,
        ];
        Ok(Outputs {
            files,
            summary: json!({
                "neighborhoods": result.neighborhoods.len(),
                "residual_cells": result.residual.len(),
                "final_threshold": result.final_threshold,
                "area_km2": result.neighborhoods.iter().map(|n| n.area_km2).sum::<f64>(),
            }),
        })
    }

    fn recommend(&self) -> Result<Outputs> {
        let (ds, grid) = self.dataset()?;
        let result: BoundaryResult = self.read_json("neighborhoods/neighborhoods.json")?;
        let rc = &self.cfg.recommend;
        let tokenizer = match &rc.stopwords {
            Some(p) => Tokenizer::from_file(p)?,
            None => Tokenizer::default(),
        };
        let mut sets = vec![
            BoundarySet::from_neighborhoods(&self.cfg.hindex.label(), &result.neighborhoods),
            BoundarySet::grid_baseline(&grid, rc.baseline_width_m)?,
        ];
        for e in &rc.external {
            let text = std::fs::read_to_string(&e.path).map_err(|err| Error::io(&e.path, err))?;
            sets.push(BoundarySet::from_geojson(&e.label, &text, &grid)?);
        }
        let area = rc.eval.city_area_km2.unwrap_or_else(|| grid.area_km2());
        let reports: Vec<EvalReport> = sets
            .iter()
            .map(|set| {
                let pool = eval_users(&ds, &grid, set, &tokenizer, &rc.eval.eligibility)?;
                cross_validate(&pool, set, &rc.eval, area)
            })
            .collect::<Result<_>>()?;
        let summary: Vec<Value> = reports
            .iter()
            .map(|r| {
                json!({
                    "boundary_set": r.boundary_set,
                    "eligible_users": r.eligible_users,
                    "accuracy": r.per_n.iter().map(|m| json!([m.n, m.accuracy])).collect::<Vec<_>>(),
                    "area_cost": r.per_n.iter().map(|m| json!([m.n, m.area_cost])).collect::<Vec<_>>(),
                })
            })
            .collect();
        let files = vec![self.write_json(Stage::Recommend, "reports.json", &reports)?];
        Ok(Outputs {
            files,
            summary: Value::Array(summary),
        })
    }

    fn export(&self) -> Result<Outputs> {
        let (_, grid) = self.dataset()?;
        let hotspots: Vec<Hotspot> = self.read_json("hotspots/hotspots.json")?;
        let result: BoundaryResult = self.read_json("neighborhoods/neighborhoods.json")?;
        let stats: Vec<NeighborhoodStats> = self.read_json("neighborhoods/stats.json")?;
        let baseline = BoundarySet::grid_baseline(&grid, self.cfg.recommend.baseline_width_m)?;
        let files = vec![
            self.write(
                Stage::Export,
                "hotspots.geojson",
                &export::to_bytes(&export::hotspots_geojson(&hotspots, &grid)),
            )?,
            self.write(
                Stage::Export,
                "neighborhoods.geojson",
                &export::to_bytes(&export::neighborhoods_geojson(&result.neighborhoods, &stats, &grid)),
            )?,
            self.write(
                Stage::Export,
                "baseline.geojson",
                &export::to_bytes(&export::baseline_geojson(&baseline, &grid)),
            )?,
        ];
        Ok(Outputs {
            files,
            summary: json!({
                "hotspots": hotspots.len(),
                "neighborhoods": result.neighborhoods.len(),
                "baseline_regions": baseline.regions.len(),
            }),
        })
    }
}
