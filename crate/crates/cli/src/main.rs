use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hoodmine::boundaries::Profile;
use hoodmine::homogeneity::SimilarityMeasure;
use hoodmine::pipeline::{Overrides, Pipeline, PipelineConfig, Stage};
use hoodmine::Error;

/// Neighborhood detection from check-in data, one pipeline stage at a time.
#[derive(Debug, Parser)]
#[command(name = "hoodmine", version)]
struct Cli {
    /// synth, ingest, features, hotspots, hindex, neighborhoods, recommend,
    /// export, or all
    stage: String,
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for synthesis, classifier folds and recommendation folds.
    #[arg(long)]
    seed: Option<u64>,
    /// H_Index radius in meters.
    #[arg(long)]
    radius: Option<f64>,
    /// Similarity measure: density_cosine (alias cosine), binary_cosine,
    /// jaccard or intersect.
    #[arg(long)]
    measure: Option<String>,
    /// hoodsquare-s (400 m) or hoodsquare-l (800 m).
    #[arg(long)]
    profile: Option<String>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DEPENDENCY: u8 = 3;
const EXIT_DATA: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Spec(_) | Error::InvalidBoundingBox(_) => EXIT_CONFIG,
        Error::Dependency { .. } | Error::StaleCache { .. } | Error::Locked(_) => EXIT_DEPENDENCY,
        _ => EXIT_DATA,
    }
}

fn load(cli: &Cli) -> Result<(Pipeline, Vec<Stage>), Error> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    cfg.apply(&Overrides {
        out_dir: cli.out.clone(),
        seed: cli.seed,
        radius_m: cli.radius,
        measure: cli.measure.as_deref().map(SimilarityMeasure::parse).transpose()?,
        profile: cli.profile.as_deref().map(Profile::parse).transpose()?,
    });
    let stages = match cli.stage.as_str() {
        "all" => cfg.stages(),
        s => vec![Stage::parse(s)?],
    };
    Ok((Pipeline::new(cfg)?, stages))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (pipeline, stages) = match load(&cli) {
        Ok(p) => p,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = if cli.stage == "all" {
        pipeline.run_all()
    } else {
        pipeline.run(stages[0]).map(|r| vec![(stages[0], r)])
    };
    match result {
        Ok(records) => {
            for (stage, rec) in records {
                println!("{stage}: {}", rec.summary);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
