mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use common::{tree, validate_geojson};
use hoodmine::pipeline::{Manifest, Pipeline, PipelineConfig, Stage, LOCK_FILE};
use hoodmine::Error;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/two_disc")
}

fn config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixture().join("pipeline.json")).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

#[test]
fn full_run_on_two_disc_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(config(dir.path())).unwrap();
    let records = p.run_all().unwrap();
    assert_eq!(records.len(), Stage::ALL.len());

    let manifest = Manifest::load(dir.path()).unwrap();
    for s in Stage::ALL {
        let rec = &manifest.stages[s.name()];
        assert!(!rec.outputs.is_empty(), "{s} has no outputs");
        for rel in rec.outputs.keys() {
            assert!(dir.path().join(rel).is_file(), "{rel} missing");
        }
    }
    let hoods = validate_geojson(&dir.path().join("export/neighborhoods.geojson"));
    assert!(hoods >= 2, "only {hoods} neighborhoods");
    assert!(validate_geojson(&dir.path().join("export/hotspots.geojson")) > 0);
    assert!(validate_geojson(&dir.path().join("export/baseline.geojson")) > 0);
    assert!(!dir.path().join(LOCK_FILE).exists());

    let first = tree(dir.path());
    p.run_all().unwrap();
    assert_eq!(tree(dir.path()), first, "rerun changed outputs");

    let other = tempfile::tempdir().unwrap();
    Pipeline::new(config(other.path())).unwrap().run_all().unwrap();
    let a: BTreeMap<_, _> = first.iter().filter(|(k, _)| k.as_str() != "manifest.json").collect();
    let second = tree(other.path());
    let b: BTreeMap<_, _> = second.iter().filter(|(k, _)| k.as_str() != "manifest.json").collect();
    assert_eq!(a, b, "independent runs differ");
    let ma = Manifest::load(dir.path()).unwrap();
    let mb = Manifest::load(other.path()).unwrap();
    assert_eq!(ma, mb);
}

#[test]
fn neighborhoods_before_hindex_names_hindex() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(config(dir.path())).unwrap();
    match p.run(Stage::Features) {
        Err(Error::Dependency { stage }) => assert_eq!(stage, "synth"),
        other => panic!("expected a dependency error, got {other:?}"),
    }
    for s in [Stage::Synth, Stage::Ingest, Stage::Features, Stage::Hotspots] {
        p.run(s).unwrap();
    }
    match p.run(Stage::Neighborhoods) {
        Err(Error::Dependency { stage }) => assert_eq!(stage, "hindex"),
        other => panic!("expected a dependency error, got {other:?}"),
    }
    match p.run(Stage::Export) {
        Err(Error::Dependency { stage }) => assert_eq!(stage, "hindex"),
        other => panic!("expected a dependency error, got {other:?}"),
    }
}

#[test]
fn changed_upstream_config_is_a_stale_cache() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(config(dir.path())).unwrap();
    for s in [Stage::Synth, Stage::Ingest, Stage::Features, Stage::Hotspots] {
        p.run(s).unwrap();
    }
    let mut cfg = config(dir.path());
    cfg.hotspots.min_pts = 7;
    match Pipeline::new(cfg.clone()).unwrap().run(Stage::Hindex) {
        Err(Error::StaleCache { stage }) => assert_eq!(stage, "hotspots"),
        other => panic!("expected a stale cache, got {other:?}"),
    }
    cfg.features.cv_seed = 99;
    match Pipeline::new(cfg.clone()).unwrap().run(Stage::Hindex) {
        Err(Error::StaleCache { stage }) => assert_eq!(stage, "features"),
        other => panic!("expected a stale cache, got {other:?}"),
    }
    let p2 = Pipeline::new(cfg).unwrap();
    p2.run(Stage::Features).unwrap();
    p2.run(Stage::Hotspots).unwrap();
    p2.run(Stage::Hindex).unwrap();
}

#[test]
fn deleting_downstream_artifacts_leaves_upstream_reruns_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(config(dir.path())).unwrap();
    for s in [Stage::Synth, Stage::Ingest, Stage::Features, Stage::Hotspots, Stage::Hindex, Stage::Neighborhoods] {
        p.run(s).unwrap();
    }
    let before = std::fs::read(dir.path().join("hindex/hindex.json")).unwrap();
    std::fs::remove_dir_all(dir.path().join("neighborhoods")).unwrap();
    p.run(Stage::Hindex).unwrap();
    assert_eq!(std::fs::read(dir.path().join("hindex/hindex.json")).unwrap(), before);
    match p.run(Stage::Export) {
        Err(Error::Dependency { stage }) => assert_eq!(stage, "neighborhoods"),
        other => panic!("expected a dependency error, got {other:?}"),
    }
}

#[test]
fn held_lock_blocks_a_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(LOCK_FILE), b"").unwrap();
    let p = Pipeline::new(config(dir.path())).unwrap();
    assert!(matches!(p.run(Stage::Synth), Err(Error::Locked(_))));
}

#[test]
fn default_config_dump_matches_golden() {
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/default_config.json")).unwrap();
    let dump = serde_json::to_string_pretty(&PipelineConfig::default()).unwrap();
    assert_eq!(dump.trim_end(), golden.trim_end());

    let v: serde_json::Value = serde_json::from_str(&golden).unwrap();
    assert_eq!(v["boundaries"]["min"], 8);
    assert_eq!(v["boundaries"]["max"], 160);
    assert_eq!(v["boundaries"]["increment"], 0.02);
    assert_eq!(v["hindex"]["profile"], "hoodsquare-s");
    assert_eq!(PipelineConfig::default().hindex.params().radius_m, 400.0);
    assert_eq!(v["hindex"]["measure"], "density_cosine");
    assert_eq!(v["hotspots"]["min_pts"], 5);
    assert_eq!(v["recommend"]["k"], 10);
    assert_eq!(v["recommend"]["baseline_width_m"], 800.0);
    assert_eq!(v["recommend"]["ns"], serde_json::json!([1, 5, 10, 15, 20, 25]));
}
