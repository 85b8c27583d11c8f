//! Experiment configuration.
//!
//! A run is described by one TOML document. Every key is optional:
//!
//! ```toml
//! data_dir = "data"            # holds sample_{year}/sample_orig_{year}.txt and sample_svcg_{year}.txt
//! output_dir = "results"
//! vintages = [1999, 2005, 2011]  # default: 1999 through 2017
//! customer_sample = 2000       # customers drawn per vintage
//! holdout_fraction = 0.3
//! seed = 0                     # root seed for every stochastic stage
//! preset = "full"              # "full" or "desk": defaults for models and feature selection
//! lenient_parsing = false      # skip malformed lines instead of failing
//! features = ["creditScore", "originalLoanToValue"]  # default: every usable field
//!
//! [resample]
//! k = 5
//! target_ratio = 1.0
//!
//! [feature_selection]          # replaces the preset's settings
//! enabled = true
//! forest_trees = 100
//! thresholds = { importance = 1e-6, correlation = 0.1 }
//! ga = { population = 30, generations = 30 }
//!
//! [[models]]                   # replaces the preset's model list
//! kind = "RF"
//! params = { n_trees = 100 }
//! ```
//!
//! Precedence, lowest first: built-in defaults, the file, the `DEFAULTBENCH_DATA_DIR`
//! environment variable, then `key.path=value` overrides from the command line.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::BenchError;
use crate::feature_selection::{GaParams, SelectionConfig};
use crate::loan_data::{assign_regime, candidate_features, FIRST_VINTAGE, LAST_VINTAGE};
use crate::models::{ClassifierSpec, ModelKind};
use crate::resampling::ResampleConfig;

pub const DATA_DIR_ENV: &str = "DEFAULTBENCH_DATA_DIR";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Library defaults for every model and for feature selection.
    #[default]
    Full,
    /// Fewer trees, rounds and epochs and a small GA, for single-core desk runs.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub kind: ModelKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleSettings {
    pub k: usize,
    pub target_ratio: f64,
}

impl Default for ResampleSettings {
    fn default() -> Self {
        let d = ResampleConfig::default();
        Self { k: d.k, target_ratio: d.target_ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub vintages: Vec<u16>,
    pub customer_sample: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub preset: Preset,
    pub lenient_parsing: bool,
    pub features: Option<Vec<String>>,
    pub resample: ResampleSettings,
    pub feature_selection: Option<SelectionConfig>,
    pub models: Option<Vec<ModelEntry>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("results"),
            vintages: (FIRST_VINTAGE..=LAST_VINTAGE).collect(),
            customer_sample: 2000,
            holdout_fraction: 0.30,
            seed: 0,
            preset: Preset::Full,
            lenient_parsing: false,
            features: None,
            resample: ResampleSettings::default(),
            feature_selection: None,
            models: None,
        }
    }
}

fn entry(kind: ModelKind, params: &[(&str, f64)]) -> ModelEntry {
    ModelEntry { kind, params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
}

fn desk_ga() -> GaParams {
    GaParams { population: 8, generations: 4, stall_generations: 2, fitness_rows: 2000, fitness_trees: 5, ..GaParams::default() }
}

impl Preset {
    pub fn models(self) -> Vec<ModelEntry> {
        match self {
            Preset::Full => ModelKind::ALL.iter().map(|&k| entry(k, &[])).collect(),
            Preset::Desk => {
                let ga = desk_ga();
                vec![
                    entry(ModelKind::LR, &[]),
                    entry(ModelKind::MDA, &[]),
                    entry(ModelKind::NB, &[]),
                    entry(ModelKind::DT, &[("max_bins", 64.0)]),
                    entry(ModelKind::RF, &[("n_trees", 20.0), ("max_bins", 64.0)]),
                    entry(ModelKind::ET, &[("n_trees", 20.0), ("max_bins", 64.0)]),
                    entry(ModelKind::AB, &[("n_rounds", 30.0), ("max_bins", 64.0)]),
                    entry(ModelKind::GB, &[("n_rounds", 20.0), ("max_bins", 64.0)]),
                    entry(ModelKind::SVM, &[("max_epochs", 20.0)]),
                    entry(ModelKind::ANN, &[("epochs", 3.0)]),
                    entry(ModelKind::RS, &[]),
                    entry(
                        ModelKind::GA,
                        &[
                            ("population", ga.population as f64),
                            ("generations", ga.generations as f64),
                            ("stall_generations", ga.stall_generations as f64),
                            ("fitness_rows", ga.fitness_rows as f64),
                            ("fitness_trees", ga.fitness_trees as f64),
                            ("n_trees", 20.0),
                            ("max_bins", 64.0),
                        ],
                    ),
                ]
            }
        }
    }

    pub fn feature_selection(self) -> SelectionConfig {
        match self {
            Preset::Full => SelectionConfig::default(),
            Preset::Desk => SelectionConfig { forest_trees: 10, forest_max_depth: 8, ga: desk_ga(), ..SelectionConfig::default() },
        }
    }
}

/// Sets `path` (dot-separated) in `table`, creating intermediate tables.
fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), BenchError> {
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| BenchError::Config(format!("empty key in `{path}`")))?;
    let mut current = table;
    for key in keys {
        let next = current.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = next.as_table_mut().ok_or_else(|| BenchError::Config(format!("`{key}` in `{path}` is not a table")))?;
    }
    current.insert(last.to_string(), value);
    Ok(())
}

/// Parses the right-hand side of an override as a TOML value, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        Self::resolve_str(text, None, &[])
    }

    /// Merges the file (if any), the data-directory environment value and `key=value`
    /// overrides, then validates the result.
    pub fn resolve(file: Option<&Path>, env_data_dir: Option<&str>, overrides: &[String]) -> Result<Self, BenchError> {
        let text = match file {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?,
            None => String::new(),
        };
        Self::resolve_str(&text, env_data_dir, overrides)
    }

    fn resolve_str(text: &str, env_data_dir: Option<&str>, overrides: &[String]) -> Result<Self, BenchError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        if let Some(dir) = env_data_dir.filter(|d| !d.is_empty()) {
            table.insert("data_dir".into(), toml::Value::String(dir.to_string()));
        }
        for item in overrides {
            let (key, raw) =
                item.split_once('=').ok_or_else(|| BenchError::Config(format!("override `{item}` is not key=value")))?;
            set_path(&mut table, key.trim(), override_value(raw.trim()))?;
        }
        let config: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.vintages.is_empty() {
            return bad("no vintages".into());
        }
        let mut seen = BTreeSet::new();
        for &year in &self.vintages {
            assign_regime(year).map_err(|e| BenchError::Config(e.to_string()))?;
            if !seen.insert(year) {
                return bad(format!("vintage {year} listed twice"));
            }
        }
        if self.customer_sample == 0 {
            return bad("customer_sample must be at least 1".into());
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad(format!("holdout_fraction {} is not in (0, 1)", self.holdout_fraction));
        }
        self.resample_config(0).validate().map_err(|e| BenchError::Config(e.to_string()))?;
        if let Some(features) = &self.features {
            if features.is_empty() {
                return bad("feature list is empty".into());
            }
            let usable = candidate_features();
            if let Some(f) = features.iter().find(|f| !usable.contains(&f.as_str())) {
                return bad(format!("`{f}` is not a usable feature"));
            }
        }
        let entries = self.model_entries();
        if entries.is_empty() {
            return bad("no models".into());
        }
        let mut kinds = BTreeSet::new();
        for e in &entries {
            if !kinds.insert(e.kind) {
                return bad(format!("model {} listed twice", e.kind));
            }
            ClassifierSpec::new(e.kind, e.params.clone(), 0).map_err(|err| BenchError::Config(err.to_string()))?;
        }
        Ok(())
    }

    pub fn model_entries(&self) -> Vec<ModelEntry> {
        self.models.clone().unwrap_or_else(|| self.preset.models())
    }

    pub fn selection(&self) -> SelectionConfig {
        self.feature_selection.unwrap_or_else(|| self.preset.feature_selection())
    }

    pub fn resample_config(&self, seed: u64) -> ResampleConfig {
        ResampleConfig { k: self.resample.k, target_ratio: self.resample.target_ratio, seed }
    }

    /// Feature names to encode.
    pub fn feature_names(&self) -> Vec<String> {
        self.features.clone().unwrap_or_else(|| candidate_features().into_iter().map(String::from).collect())
    }

    /// SHA-256 of the resolved configuration's canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
