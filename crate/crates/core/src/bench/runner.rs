//! Pipeline orchestration: load, sample, encode, select features, run the
//! experiment, write reports and a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::report::{self, WrittenFile};
use super::{BenchError, Stage};
use crate::evaluation::{run_experiment, ExperimentOptions, MetricsReport, VintageData, VintageSplit};
use crate::feature_selection::{select_features, write_verdicts_csv};
use crate::loan_data::{self, encode, load_vintage, stratified_sample, vintage_paths, ParseOptions, Regime};
use crate::models::{ClassifierSpec, ModelKind};
use crate::rng::{derive_indexed, derive_seed};

pub const MANIFEST_JSON: &str = "manifest.json";
pub const DIAGNOSTICS_LOG: &str = "diagnostics.log";
pub const SPLITS_CSV: &str = "splits.csv";

/// Versions of the libraries this binary was built with, captured at build time.
const LIBRARY_VERSIONS: &str = env!("DEFAULTBENCH_LIBRARY_VERSIONS");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// Content depends on wall-clock time and differs between reruns.
    pub volatile: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub reports: Vec<MetricsReport>,
    pub splits: Vec<VintageSplit>,
    pub skipped: Vec<(u16, String)>,
    pub artifacts: Vec<Artifact>,
}

impl RunSummary {
    pub fn failed_cells(&self) -> usize {
        self.reports.iter().filter(|r| r.error.is_some()).count()
    }

    /// Some vintage was skipped or some cell failed.
    pub fn is_partial(&self) -> bool {
        !self.skipped.is_empty() || self.failed_cells() > 0
    }
}

#[derive(Serialize)]
struct StageSeeds {
    vintage: u16,
    sample: u64,
    features: u64,
    split: u64,
    smote: u64,
}

#[derive(Serialize)]
struct CellEntry<'a> {
    vintage: u16,
    model: ModelKind,
    variant: &'a str,
    holdout_checksum: &'a str,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: u32,
    complete: bool,
    error: Option<String>,
    config_hash: String,
    config: &'a ExperimentConfig,
    root_seed: u64,
    stage_seeds: Vec<StageSeeds>,
    model_seeds: BTreeMap<String, u64>,
    libraries: BTreeMap<&'static str, &'static str>,
    reports: usize,
    failed_cells: usize,
    cells: Vec<CellEntry<'a>>,
    skipped: Vec<(u16, String)>,
    files: Vec<Artifact>,
}

fn libraries() -> BTreeMap<&'static str, &'static str> {
    let mut out: BTreeMap<&'static str, &'static str> =
        LIBRARY_VERSIONS.split(',').filter_map(|pair| pair.split_once('=')).collect();
    out.insert("defaultbench-core", env!("CARGO_PKG_VERSION"));
    out
}

/// Writes files under the output directory and remembers them for the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, bool)>,
    log: String,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, BenchError> {
        std::fs::create_dir_all(dir).map_err(|source| BenchError::Output { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), log: String::new() })
    }

    fn write(&mut self, name: &str, body: &[u8]) -> Result<(), BenchError> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|source| BenchError::Output { path, source })?;
        self.files.push((name.to_string(), false));
        Ok(())
    }

    fn log(&mut self, stage: &str, line: impl AsRef<str>) {
        writeln!(self.log, "[{stage}] {}", line.as_ref()).unwrap();
    }

    fn artifacts(&self) -> Result<Vec<Artifact>, BenchError> {
        let mut out = Vec::new();
        for (name, volatile) in &self.files {
            let path = self.dir.join(name);
            let body = std::fs::read(&path).map_err(|source| BenchError::Output { path, source })?;
            out.push(Artifact {
                path: name.clone(),
                sha256: hex::encode(Sha256::digest(&body)),
                bytes: body.len() as u64,
                volatile: *volatile,
            });
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(out)
    }
}

fn model_specs(config: &ExperimentConfig) -> Vec<ClassifierSpec> {
    config
        .model_entries()
        .into_iter()
        .map(|e| {
            let index = ModelKind::ALL.iter().position(|&k| k == e.kind).expect("kind in ALL") as u64;
            ClassifierSpec { kind: e.kind, params: e.params, seed: derive_indexed(derive_seed(config.seed, "model"), "kind", index) }
        })
        .collect()
}

fn stage_seeds(config: &ExperimentConfig) -> Vec<StageSeeds> {
    config
        .vintages
        .iter()
        .map(|&y| {
            let i = u64::from(y);
            StageSeeds {
                vintage: y,
                sample: derive_indexed(config.seed, "sample", i),
                features: derive_indexed(config.seed, "features", i),
                split: derive_indexed(config.seed, "split", i),
                smote: derive_indexed(config.seed, "smote", i),
            }
        })
        .collect()
}

/// Fails unless every vintage's origination and performance files exist.
fn check_inputs(config: &ExperimentConfig) -> Result<(), BenchError> {
    for &year in &config.vintages {
        let (orig, perf) = vintage_paths(&config.data_dir, year);
        for path in [orig, perf] {
            if !path.is_file() {
                return Err(BenchError::Data {
                    stage: Stage::Load,
                    year,
                    message: format!("missing input file {}", path.display()),
                });
            }
        }
    }
    Ok(())
}

fn data_err(stage: Stage, year: u16) -> impl Fn(loan_data::DataError) -> BenchError {
    move |e| BenchError::Data { stage, year, message: e.to_string() }
}

fn prepare_vintage(config: &ExperimentConfig, year: u16, out: &mut Outputs) -> Result<VintageData, BenchError> {
    let options = ParseOptions { lenient: config.lenient_parsing };
    let loaded = load_vintage(&config.data_dir, year, options).map_err(data_err(Stage::Load, year))?;
    let j = &loaded.join;
    out.log(
        "load",
        format!(
            "{year} ({}): {} rows, {} customers, {} defaulted rows ({:.4}%), {} defaulted customers, {} orphan rows",
            loaded.regime,
            j.joined_rows,
            j.customers,
            j.defaulted_rows,
            100.0 * j.defaulted_rows as f64 / j.joined_rows.max(1) as f64,
            j.defaulted_customers,
            j.orphan_rows
        ),
    );
    let c = &loaded.clean;
    out.log(
        "clean",
        format!(
            "{year}: dropped {} loans ({} performance rows), imputed {} nominal and {} numeric cells",
            c.dropped_loans, c.dropped_performance_rows, c.imputed_nominal_cells, c.imputed_numeric_cells
        ),
    );
    for m in &loaded.malformed {
        out.log("parse", format!("{year}: skipped {} line {}: {}", m.file, m.line, m.reason));
    }

    let sample = stratified_sample(&loaded.records, config.customer_sample, derive_indexed(config.seed, "sample", year.into()))
        .map_err(data_err(Stage::Sample, year))?;
    let defaulted = sample.iter().filter(|r| r.defaulted).count();
    out.log("sample", format!("{year}: {} rows, {defaulted} defaulted", sample.len()));

    let (data, _) = encode(&sample, &config.feature_names()).map_err(data_err(Stage::Encode, year))?;
    let data = data.with_vintage(year);
    if !data.has_both_classes() {
        return Err(BenchError::Data {
            stage: Stage::Encode,
            year,
            message: "the sample has a single class; increase customer_sample".into(),
        });
    }
    out.log("encode", format!("{year}: {} features", data.n_features()));

    let selection = config.selection();
    let data = if selection.enabled {
        let report = select_features(&data, &selection, derive_indexed(config.seed, "features", year.into()));
        let mut csv = Vec::new();
        write_verdicts_csv(&report.verdicts, &mut csv)
            .map_err(|e| BenchError::Data { stage: Stage::Select, year, message: e.to_string() })?;
        out.write(&format!("features_{year}.csv"), &csv)?;
        out.log("select", format!("{year}: kept {} of {}: {}", report.kept.len(), data.n_features(), report.kept.join(", ")));
        data.select_features(&report.kept)
            .map_err(|e| BenchError::Data { stage: Stage::Select, year, message: e.to_string() })?
    } else {
        data
    };
    Ok(VintageData { year, regime: loaded.regime, data })
}

fn write_manifest(
    out: &mut Outputs,
    config: &ExperimentConfig,
    reports: &[MetricsReport],
    skipped: &[(u16, String)],
    error: Option<String>,
) -> Result<Vec<Artifact>, BenchError> {
    out.write(DIAGNOSTICS_LOG, out.log.clone().as_bytes())?;
    let files = out.artifacts()?;
    let mut sorted: Vec<&MetricsReport> = reports.iter().collect();
    sorted.sort_by_key(|r| (r.vintage_year, r.model, r.variant));
    let manifest = Manifest {
        format: "defaultbench-manifest",
        version: 1,
        complete: error.is_none(),
        error,
        config_hash: config.hash(),
        config,
        root_seed: config.seed,
        stage_seeds: stage_seeds(config),
        model_seeds: model_specs(config).into_iter().map(|s| (s.kind.to_string(), s.seed)).collect(),
        libraries: libraries(),
        reports: reports.len(),
        failed_cells: reports.iter().filter(|r| r.error.is_some()).count(),
        cells: sorted
            .iter()
            .map(|r| CellEntry {
                vintage: r.vintage_year,
                model: r.model,
                variant: r.variant.as_str(),
                holdout_checksum: &r.holdout_checksum,
                error: r.error.as_deref(),
            })
            .collect(),
        skipped: skipped.to_vec(),
        files: files.clone(),
    };
    let mut body = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    body.push(b'\n');
    let path = out.dir.join(MANIFEST_JSON);
    std::fs::write(&path, body).map_err(|source| BenchError::Output { path, source })?;
    Ok(files)
}

#[derive(Serialize)]
struct SplitRow<'a> {
    vintage_year: u16,
    train_rows: usize,
    holdout_rows: usize,
    resampled_rows: usize,
    holdout_checksum: &'a str,
}

/// Runs the whole pipeline described by `config`.
///
/// Stage failures abort the run; the manifest written so far is marked incomplete.
/// Failures of individual (vintage, model, variant) cells are recorded and the run goes on.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary, BenchError> {
    config.validate()?;
    check_inputs(config)?;
    let mut out = Outputs::new(&config.output_dir)?;
    let outcome = run_stages(config, &mut out);
    match outcome {
        Ok((reports, splits, skipped)) => {
            let artifacts = write_manifest(&mut out, config, &reports, &skipped, None)?;
            Ok(RunSummary { output_dir: config.output_dir.clone(), reports, splits, skipped, artifacts })
        }
        Err(e) => {
            out.log("abort", e.to_string());
            // Best effort: the original error matters more than a failure to record it.
            let _ = write_manifest(&mut out, config, &[], &[], Some(e.to_string()));
            Err(e)
        }
    }
}

type StageOutput = (Vec<MetricsReport>, Vec<VintageSplit>, Vec<(u16, String)>);

fn run_stages(config: &ExperimentConfig, out: &mut Outputs) -> Result<StageOutput, BenchError> {
    let mut vintages = Vec::new();
    for &year in &config.vintages {
        vintages.push(prepare_vintage(config, year, out)?);
    }
    let specs = model_specs(config);
    let options = ExperimentOptions {
        holdout_fraction: config.holdout_fraction,
        resample: config.resample_config(0),
        seed: config.seed,
    };
    let outcome = run_experiment(&vintages, &specs, &options);
    for s in &outcome.splits {
        out.log(
            "split",
            format!(
                "{}: {} training rows, {} holdout rows, {} rows after resampling, holdout {}",
                s.year, s.train_rows, s.holdout_rows, s.resampled_rows, s.holdout_checksum
            ),
        );
    }
    for (year, reason) in &outcome.skipped {
        out.log("skip", format!("{year}: {reason}"));
    }
    let mut failed: Vec<&MetricsReport> = outcome.reports.iter().filter(|r| r.error.is_some()).collect();
    failed.sort_by_key(|r| (r.vintage_year, r.model, r.variant));
    for r in failed {
        out.log("cell", format!("{} {} {}: {}", r.vintage_year, r.model, r.variant, r.error.as_deref().unwrap_or("")));
    }

    let mut csv = csv::Writer::from_writer(Vec::new());
    for s in &outcome.splits {
        csv.serialize(SplitRow {
            vintage_year: s.year,
            train_rows: s.train_rows,
            holdout_rows: s.holdout_rows,
            resampled_rows: s.resampled_rows,
            holdout_checksum: &s.holdout_checksum,
        })
        .expect("in-memory CSV");
    }
    out.write(SPLITS_CSV, &csv.into_inner().expect("in-memory CSV"))?;

    if outcome.reports.is_empty() {
        return Err(BenchError::Report("no vintage could be evaluated".into()));
    }
    let written: Vec<WrittenFile> = report::write_reports(&outcome.reports, &out.dir, true)?;
    out.files.extend(written.into_iter().map(|w| (w.name, w.volatile)));
    Ok((outcome.reports, outcome.splits, outcome.skipped))
}

/// Class balance of one vintage as found on disk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VintageStats {
    pub year: u16,
    pub regime: Regime,
    pub customers: usize,
    pub rows: usize,
    pub defaulted_rows: usize,
    pub defaulted_customers: usize,
    pub malformed_lines: usize,
    pub dropped_loans: usize,
}

impl VintageStats {
    pub fn row_default_rate(&self) -> f64 {
        self.defaulted_rows as f64 / self.rows.max(1) as f64
    }

    pub fn customer_default_rate(&self) -> f64 {
        self.defaulted_customers as f64 / self.customers.max(1) as f64
    }
}

/// Loads each configured vintage and reports its size and class balance.
pub fn inspect(config: &ExperimentConfig) -> Result<Vec<VintageStats>, BenchError> {
    check_inputs(config)?;
    let options = ParseOptions { lenient: config.lenient_parsing };
    config
        .vintages
        .iter()
        .map(|&year| {
            let v = load_vintage(&config.data_dir, year, options).map_err(data_err(Stage::Load, year))?;
            Ok(VintageStats {
                year,
                regime: v.regime,
                customers: v.join.customers,
                rows: v.join.joined_rows,
                defaulted_rows: v.join.defaulted_rows,
                defaulted_customers: v.join.defaulted_customers,
                malformed_lines: v.malformed.len(),
                dropped_loans: v.clean.dropped_loans,
            })
        })
        .collect()
}

/// Plain-text table of [`inspect`] output, per vintage and per regime.
pub fn format_stats(stats: &[VintageStats]) -> String {
    let mut out = String::new();
    writeln!(out, "{:<8}{:<8}{:>10}{:>10}{:>10}{:>12}{:>12}", "vintage", "regime", "customers", "rows", "defaults", "row rate", "cust. rate")
        .unwrap();
    let line = |out: &mut String, name: &str, regime: &str, s: &VintageStats| {
        writeln!(
            out,
            "{:<8}{:<8}{:>10}{:>10}{:>10}{:>11.4}%{:>11.3}%",
            name,
            regime,
            s.customers,
            s.rows,
            s.defaulted_rows,
            100.0 * s.row_default_rate(),
            100.0 * s.customer_default_rate()
        )
        .unwrap();
    };
    for s in stats {
        line(&mut out, &s.year.to_string(), s.regime.as_str(), s);
    }
    for regime in [Regime::Medium, Regime::High, Regime::Low] {
        let members: Vec<&VintageStats> = stats.iter().filter(|s| s.regime == regime).collect();
        if members.is_empty() {
            continue;
        }
        let total = VintageStats {
            year: 0,
            regime,
            customers: members.iter().map(|s| s.customers).sum(),
            rows: members.iter().map(|s| s.rows).sum(),
            defaulted_rows: members.iter().map(|s| s.defaulted_rows).sum(),
            defaulted_customers: members.iter().map(|s| s.defaulted_customers).sum(),
            malformed_lines: members.iter().map(|s| s.malformed_lines).sum(),
            dropped_loans: members.iter().map(|s| s.dropped_loans).sum(),
        };
        line(&mut out, "all", regime.as_str(), &total);
    }
    out
}
