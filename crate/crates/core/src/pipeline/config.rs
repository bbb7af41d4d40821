use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boundaries::{BoundaryParams, Profile};
use crate::error::{Error, Result};
use crate::features::FeaturesConfig;
use crate::homogeneity::{HIndexParams, Normalization, SimilarityMeasure};
use crate::hotspots::HotspotParams;
use crate::recommend::{EvalParams, GRID_BASELINE_WIDTH_M};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HIndexConfig {
    #[serde(default)]
    pub profile: Profile,
    /// Overrides the profile's radius.
    #[serde(default)]
    pub radius_m: Option<f64>,
    #[serde(default)]
    pub measure: SimilarityMeasure,
    #[serde(default)]
    pub normalization: Normalization,
}

impl Default for HIndexConfig {
    fn default() -> Self {
        HIndexConfig {
            profile: Profile::default(),
            radius_m: None,
            measure: SimilarityMeasure::default(),
            normalization: Normalization::default(),
        }
    }
}

impl HIndexConfig {
    pub fn params(&self) -> HIndexParams {
        HIndexParams {
            radius_m: self.radius_m.unwrap_or_else(|| self.profile.radius_m()),
            measure: self.measure,
            normalization: self.normalization,
        }
    }

    /// Label of the detected boundary set in reports.
    pub fn label(&self) -> String {
        match self.radius_m {
            Some(r) if r != self.profile.radius_m() => format!("hoodsquare-r{r}"),
            _ => self.profile.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalBoundaries {
    pub label: String,
    /// GeoJSON Polygon/MultiPolygon collection.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendConfig {
    #[serde(flatten)]
    pub eval: EvalParams,
    /// Stopword file, one word per line; the bundled list when absent.
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default = "default_baseline_width")]
    pub baseline_width_m: f64,
    #[serde(default)]
    pub external: Vec<ExternalBoundaries>,
}

fn default_baseline_width() -> f64 {
    GRID_BASELINE_WIDTH_M
}

impl Default for RecommendConfig {
    fn default() -> Self {
        RecommendConfig {
            eval: EvalParams::default(),
            stopwords: None,
            baseline_width_m: default_baseline_width(),
            external: Vec::new(),
        }
    }
}

/// Everything one pipeline run needs. Relative paths are resolved against
/// the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// City config (`{name, bbox, cell_size_m}`).
    #[serde(default)]
    pub city: Option<PathBuf>,
    /// Directory with venues.csv, checkins.csv, users.csv and taxonomy.csv;
    /// defaults to the city config's directory.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    /// Seed labels (`venue_id,label`); `<data_dir>/labels.csv` when present.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Synthetic city spec; its output feeds ingest when no city is given.
    #[serde(default)]
    pub synth: Option<PathBuf>,
    /// Replaces the synthetic spec's seed.
    #[serde(default)]
    pub synth_seed: Option<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub hotspots: HotspotParams,
    #[serde(default)]
    pub hindex: HIndexConfig,
    #[serde(default)]
    pub boundaries: BoundaryParams,
    #[serde(default)]
    pub recommend: RecommendConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            city: None,
            data_dir: None,
            labels: None,
            synth: None,
            synth_seed: None,
            out_dir: default_out_dir(),
            features: FeaturesConfig::default(),
            hotspots: HotspotParams::default(),
            hindex: HIndexConfig::default(),
            boundaries: BoundaryParams::default(),
            recommend: RecommendConfig::default(),
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub radius_m: Option<f64>,
    pub measure: Option<SimilarityMeasure>,
    pub profile: Option<Profile>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.city, &mut self.data_dir, &mut self.labels, &mut self.synth, &mut self.recommend.stopwords]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.out_dir);
        for e in &mut self.recommend.external {
            fix(&mut e.path);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out_dir {
            self.out_dir = out.clone();
        }
        if let Some(seed) = o.seed {
            self.recommend.eval.seed = seed;
            self.features.cv_seed = seed;
            self.synth_seed = Some(seed);
        }
        if let Some(p) = o.profile {
            self.hindex.profile = p;
            self.hindex.radius_m = None;
        }
        if let Some(r) = o.radius_m {
            self.hindex.radius_m = Some(r);
        }
        if let Some(m) = o.measure {
            self.hindex.measure = m;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.boundaries.validate()?;
        self.features.periods.validate()?;
        let r = self.hindex.params().radius_m;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!("H_Index radius must be positive, got {r}")));
        }
        if self.hotspots.min_pts < 2 {
            return Err(Error::Config("OPTICS min_pts must be at least 2".into()));
        }
        if let Some(eps) = self.hotspots.eps {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("OPTICS eps must be positive, got {eps}")));
            }
        }
        if !(self.hotspots.significance_ratio > 0.0 && self.hotspots.significance_ratio < 1.0) {
            return Err(Error::Config("significance_ratio must lie in (0, 1)".into()));
        }
        if !(self.recommend.baseline_width_m > 0.0) {
            return Err(Error::Config("baseline_width_m must be positive".into()));
        }
        if let Some(a) = self.recommend.eval.city_area_km2 {
            if !(a > 0.0) {
                return Err(Error::Config(format!("city_area_km2 must be positive, got {a}")));
            }
        }
        if self.city.is_none() && self.synth.is_none() {
            return Err(Error::Config("config needs a `city` or a `synth` spec".into()));
        }
        Ok(())
    }
}
