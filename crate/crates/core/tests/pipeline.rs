use std::collections::BTreeMap;
use std::path::Path;

use defaultbench_core::bench::{
    self, generate_synthetic, read_metrics_csv, write_reports, BenchError, ExperimentConfig, ModelEntry, Preset, Stage,
    SyntheticSpec,
};
use defaultbench_core::evaluation::{confusion, split, SplitPlan, Variant};
use defaultbench_core::feature_selection::SelectionConfig;
use defaultbench_core::loan_data::{candidate_features, encode, load_vintage, vintage_paths, ParseOptions};
use defaultbench_core::models::{fit, ClassifierSpec, ModelKind};
use defaultbench_core::resampling::{smote, ResampleConfig};

fn generate(dir: &Path, year: u16, customers: usize, seed: u64) -> bench::GeneratedVintage {
    let spec = SyntheticSpec::regime_preset(year, customers, seed).unwrap();
    generate_synthetic(&spec, dir).unwrap()
}

fn small_config(data: &Path, out: &Path, years: &[u16], customers: usize) -> ExperimentConfig {
    ExperimentConfig {
        data_dir: data.to_path_buf(),
        output_dir: out.to_path_buf(),
        vintages: years.to_vec(),
        customer_sample: customers,
        seed: 3,
        preset: Preset::Desk,
        models: Some(vec![
            ModelEntry { kind: ModelKind::NB, params: BTreeMap::new() },
            ModelEntry { kind: ModelKind::DT, params: BTreeMap::from([("max_depth".to_string(), 4.0)]) },
        ]),
        ..ExperimentConfig::default()
    }
}

#[test]
fn generated_files_load_back_with_the_same_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let g = generate(tmp.path(), 2008, 500, 1);
    let loaded = load_vintage(tmp.path(), 2008, ParseOptions::default()).unwrap();
    assert_eq!(loaded.join.customers, g.customers);
    assert_eq!(loaded.join.joined_rows, g.rows);
    assert_eq!(loaded.join.defaulted_rows, g.defaulted_rows);
    assert_eq!(loaded.join.orphan_rows, 0);
    assert!(loaded.malformed.is_empty());
    assert_eq!(loaded.clean.dropped_loans, 0);
    let expected = (g.rows as f64 * 0.0009).round() as usize;
    assert_eq!(g.defaulted_rows, expected);
}

#[test]
fn one_vintage_two_models_gives_four_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, 2006, 600, 2);
    let out = tmp.path().join("out");
    let summary = bench::run(&small_config(&data, &out, &[2006], 600)).unwrap();
    assert_eq!(summary.reports.len(), 4);
    assert!(!summary.is_partial());
    for kind in [ModelKind::NB, ModelKind::DT] {
        for variant in [Variant::Original, Variant::Resampled] {
            let r = summary.reports.iter().find(|r| r.model == kind && r.variant == variant).unwrap();
            assert!(r.recall.is_some() && r.precision.is_some() || r.confusion.tp + r.confusion.fp == 0);
            assert_eq!(r.confusion.total() as usize, summary.splits[0].holdout_rows);
        }
    }
    for name in ["metrics.csv", "rankings.md", "comparison.md", "timing.md", "splits.csv", "manifest.json", "features_2006.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["reports"], 4);
}

#[test]
fn report_rebuilds_the_same_tables_from_metrics_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, 2001, 600, 4);
    generate(&data, 2009, 600, 4);
    let out = tmp.path().join("out");
    bench::run(&small_config(&data, &out, &[2001, 2009], 600)).unwrap();

    let reports = read_metrics_csv(&out.join("metrics.csv")).unwrap();
    assert_eq!(reports.len(), 8);
    let again = tmp.path().join("again");
    write_reports(&reports, &again, true).unwrap();
    for name in ["metrics.csv", "rankings.md", "comparison.md", "comparison.csv", "timing.md", "timing.csv"] {
        assert_eq!(std::fs::read(out.join(name)).unwrap(), std::fs::read(again.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn missing_vintage_file_fails_before_any_work() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, 2003, 200, 0);
    let (orig, _) = vintage_paths(&data, 2012);
    let err = bench::run(&small_config(&data, &tmp.path().join("out"), &[2003, 2012], 200)).unwrap_err();
    match &err {
        BenchError::Data { stage, year, message } => {
            assert_eq!(*stage, Stage::Load);
            assert_eq!(*year, 2012);
            assert!(message.contains(&orig.display().to_string()), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(err.exit_code(), 2);
    assert!(!tmp.path().join("out").join("metrics.csv").exists());
}

#[test]
fn invalid_config_is_a_config_error() {
    let err = ExperimentConfig::from_toml_str("holdout_fraction = 1.5").unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let err = ExperimentConfig::from_toml_str("unknown_key = 1").unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let err = ExperimentConfig::from_toml_str("vintages = [1990]").unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn same_seed_same_selection_and_splits() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, 2005, 500, 6);
    let mut config = small_config(&data, &tmp.path().join("a"), &[2005], 500);
    config.feature_selection = Some(SelectionConfig { forest_trees: 5, ..Preset::Desk.feature_selection() });
    let a = bench::run(&config).unwrap();
    config.output_dir = tmp.path().join("b");
    let b = bench::run(&config).unwrap();
    assert_eq!(a.splits, b.splits);
    for name in ["features_2005.csv", "splits.csv", "metrics.csv"] {
        assert_eq!(std::fs::read(a.output_dir.join(name)).unwrap(), std::fs::read(b.output_dir.join(name)).unwrap());
    }

    config.seed += 1;
    config.output_dir = tmp.path().join("c");
    let c = bench::run(&config).unwrap();
    assert_ne!(a.splits[0].holdout_checksum, c.splits[0].holdout_checksum);
}

/// The generator must leave enough signal for resampling to pay off:
/// a depth-3 tree trained on SMOTE output catches most defaulters at a 0.1% base rate.
#[test]
fn shallow_tree_on_resampled_synthetic_data_has_useful_recall() {
    let tmp = tempfile::tempdir().unwrap();
    let mut recalls = Vec::new();
    for seed in 0..3 {
        let spec = SyntheticSpec { default_rate: 0.001, ..SyntheticSpec::regime_preset(2007, 2000, seed).unwrap() };
        generate_synthetic(&spec, tmp.path()).unwrap();
        let loaded = load_vintage(tmp.path(), 2007, ParseOptions::default()).unwrap();
        let (data, _) = encode(&loaded.records, &candidate_features()).unwrap();
        let (train, holdout) = split(&data, &SplitPlan { holdout_fraction: 0.3, seed }).unwrap();
        let resampled = smote(&train, &ResampleConfig { seed, ..ResampleConfig::default() }).unwrap();
        let params = BTreeMap::from([("max_depth".to_string(), 3.0)]);
        let model = fit(&ClassifierSpec::new(ModelKind::DT, params, seed).unwrap(), &resampled).unwrap();
        let cm = confusion(holdout.labels(), &model.predict_all(&holdout).unwrap()).unwrap();
        recalls.push(cm.recall().unwrap());
    }
    let mean = recalls.iter().sum::<f64>() / recalls.len() as f64;
    assert!(mean >= 0.6, "{recalls:?}");
}
