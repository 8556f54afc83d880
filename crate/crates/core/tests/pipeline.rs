use std::fs;
use std::path::{Path, PathBuf};

use phonosim_core::pipeline::{run_pipeline, PartialConfig, PipelineConfig, Stage, ARTIFACTS};
use phonosim_core::selection::Strategy;

fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

/// Copies the toy bundle so a test can damage it.
fn toy_copy(dir: &Path) -> PipelineConfig {
    for sub in ["corpus", "rules"] {
        fs::create_dir_all(dir.join(sub)).unwrap();
        for entry in fs::read_dir(toy_dir().join(sub)).unwrap() {
            let p = entry.unwrap().path();
            fs::copy(&p, dir.join(sub).join(p.file_name().unwrap())).unwrap();
        }
    }
    for f in ["registry.csv", "policy.txt", "pipeline.toml"] {
        fs::copy(toy_dir().join(f), dir.join(f)).unwrap();
    }
    PartialConfig::load(dir.join("pipeline.toml"))
        .unwrap()
        .resolve()
        .unwrap()
}

#[test]
fn missing_rules_abort_at_g2p_naming_language() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_copy(dir.path());
    fs::remove_file(dir.path().join("rules/mb.tsv")).unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::G2p);
    assert_eq!(err.language.as_deref(), Some("mb"));
    assert!(err.to_string().starts_with("g2p stage [mb]"), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(!cfg.output_dir.exists() || fs::read_dir(&cfg.output_dir).unwrap().next().is_none());
}

#[test]
fn failed_run_leaves_previous_outputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_copy(dir.path());
    run_pipeline(&cfg).unwrap();
    let before = fs::read(cfg.output_dir.join("manifest.tsv")).unwrap();
    fs::write(dir.path().join("corpus/ka.tsv"), "sentence\nka!q\n").unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(
        (err.stage, err.language.as_deref()),
        (Stage::G2p, Some("ka"))
    );
    assert!(err.to_string().contains("corpus line 2"), "{err}");
    assert_eq!(
        fs::read(cfg.output_dir.join("manifest.tsv")).unwrap(),
        before
    );
    let leftovers: Vec<_> = fs::read_dir(&cfg.output_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| !ARTIFACTS.contains(&n.as_str()))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn empty_corpus_is_excluded_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_copy(dir.path());
    fs::write(dir.path().join("corpus/mb.tsv"), "path\tsentence\n").unwrap();
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.languages, ["ka", "kb", "ma"]);
    assert!(summary.warnings.iter().any(|w| w.contains("mb")));
    assert_eq!(summary.selection.source_codes(), ["kb", "ma"]);
    // k = 3 but only two candidates remain
    assert!(summary
        .selection
        .warnings
        .iter()
        .any(|w| w.contains("truncated")));
}

#[test]
fn unknown_target_fails_at_registry() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy_copy(dir.path());
    cfg.target = "zz".into();
    assert_eq!(run_pipeline(&cfg).unwrap_err().stage, Stage::Registry);
}

#[test]
fn family_strategy_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy_copy(dir.path());
    cfg.strategy = Strategy::Family;
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.selection.source_codes(), ["kb"]);
    let manifest = fs::read_to_string(cfg.output_dir.join("manifest.tsv")).unwrap();
    assert!(manifest.contains("# strategy: family"));
    assert!(manifest.lines().filter(|l| l.starts_with("kb\t")).count() == 8);
    assert!(!manifest.lines().any(|l| l.starts_with("ma\t")));
}

#[test]
fn absolute_level_below_peak_draws_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = toy_copy(dir.path());
    cfg.relative_level = false;
    cfg.contour_level = 1e9;
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(
        summary
            .warnings
            .iter()
            .filter(|w| w.contains("below level"))
            .count(),
        2
    );
    let json = fs::read_to_string(cfg.output_dir.join("contours.json")).unwrap();
    assert!(json.contains("\"below_level\": true"));
}
