//! The twelve classifier families behind one fit/score contract.
//!
//! Every kind except RS produces a class-1 score in [0, 1] and predicts 1 iff
//! the score is at least 0.5. RS (rough k-means) only predicts.

pub mod boosting;
pub mod discriminant;
pub mod forest;
pub mod grid;
pub mod linear;
pub mod mlp;
pub mod rough;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::feature_selection::{ga_select, GaParams};
use boosting::{AdaBoost, BoostingParams, GradientBoosting};
use discriminant::{NaiveBayes, Qda};
use forest::{Forest, ForestParams};
use linear::{LinearSvm, Logistic, LogisticParams, SvmParams};
use mlp::{Mlp, MlpParams};
use rough::{RoughClusterModel, RoughError, RoughParams};
use tree::{Criterion, MaxFeatures, SplitStrategy, Tree, TreeParams};

pub use grid::{grid_search, GridResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    LR,
    MDA,
    NB,
    DT,
    RF,
    ET,
    AB,
    GB,
    SVM,
    ANN,
    RS,
    GA,
}

impl ModelKind {
    pub const ALL: [ModelKind; 12] = [
        ModelKind::LR,
        ModelKind::MDA,
        ModelKind::NB,
        ModelKind::DT,
        ModelKind::RF,
        ModelKind::ET,
        ModelKind::AB,
        ModelKind::GB,
        ModelKind::SVM,
        ModelKind::ANN,
        ModelKind::RS,
        ModelKind::GA,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LR => "LR",
            ModelKind::MDA => "MDA",
            ModelKind::NB => "NB",
            ModelKind::DT => "DT",
            ModelKind::RF => "RF",
            ModelKind::ET => "ET",
            ModelKind::AB => "AB",
            ModelKind::GB => "GB",
            ModelKind::SVM => "SVM",
            ModelKind::ANN => "ANN",
            ModelKind::RS => "RS",
            ModelKind::GA => "GA",
        }
    }

    /// False only for RS, which yields a cluster label but no confidence.
    pub fn can_score(self) -> bool {
        self != ModelKind::RS
    }

    /// Accepted hyper-parameters and their defaults (`None`: derived at fit time).
    pub fn params(self) -> &'static [ParamDef] {
        use ParamDef as P;
        const TREE_GROWTH: [ParamDef; 4] = [
            P::int("max_depth", 0.0, 0.0),
            P::int("min_samples_split", 2.0, 2.0),
            P::int("min_samples_leaf", 1.0, 1.0),
            P::int("max_bins", 256.0, 2.0),
        ];
        match self {
            ModelKind::LR => {
                const T: &[ParamDef] = &[P::real("l2", 1.0, 0.0), P::int("max_iter", 100.0, 1.0), P::real("tol", 1e-8, 0.0)];
                T
            }
            ModelKind::MDA => {
                const T: &[ParamDef] = &[P::real("reg", 1e-4, 0.0)];
                T
            }
            ModelKind::NB => {
                const T: &[ParamDef] = &[P::real("var_smoothing", 1e-9, 0.0)];
                T
            }
            ModelKind::DT => &TREE_GROWTH,
            ModelKind::RF => {
                const T: &[ParamDef] = &[
                P::int("n_trees", 100.0, 1.0),
                TREE_GROWTH[0],
                TREE_GROWTH[1],
                TREE_GROWTH[2],
                TREE_GROWTH[3],
                P::int("max_features", 0.0, 0.0),
                P::int("bootstrap", 1.0, 0.0),
            ];
                T
            }
            ModelKind::ET => {
                const T: &[ParamDef] = &[
                P::int("n_trees", 100.0, 1.0),
                TREE_GROWTH[0],
                TREE_GROWTH[1],
                TREE_GROWTH[2],
                TREE_GROWTH[3],
                P::int("max_features", 0.0, 0.0),
                P::int("bootstrap", 0.0, 0.0),
            ];
                T
            }
            ModelKind::AB => {
                const T: &[ParamDef] = &[P::int("n_rounds", 50.0, 1.0), P::int("max_bins", 256.0, 2.0)];
                T
            }
            ModelKind::GB => {
                const T: &[ParamDef] = &[
                P::int("n_rounds", 100.0, 1.0),
                P::real("learning_rate", 0.1, 0.0),
                P::int("max_depth", 3.0, 1.0),
                P::int("min_samples_leaf", 1.0, 1.0),
                P::int("max_bins", 256.0, 2.0),
            ];
                T
            }
            ModelKind::SVM => {
                const T: &[ParamDef] = &[P::real("c", 1.0, 0.0), P::int("max_epochs", 200.0, 1.0), P::real("tol", 1e-3, 0.0)];
                T
            }
            ModelKind::ANN => {
                const T: &[ParamDef] = &[
                P::int("hidden_layers", 2.0, 0.0),
                P::int("hidden_units", 16.0, 1.0),
                P::real("learning_rate", 1e-3, 0.0),
                P::int("epochs", 20.0, 1.0),
                P::int("batch_size", 256.0, 1.0),
                P::real("l2", 1e-4, 0.0),
                P::real("tol", 1e-4, 0.0),
            ];
                T
            }
            ModelKind::RS => {
                const T: &[ParamDef] = &[
                P::int("k", 2.0, 2.0),
                P::derived("epsilon"),
                P::real("epsilon_fraction", 0.1, 0.0),
                P::real("w_lower", 0.7, 0.0),
                P::real("w_upper", 0.3, 0.0),
                P::int("max_iter", 100.0, 1.0),
            ];
                T
            }
            ModelKind::GA => {
                const T: &[ParamDef] = &[
                P::int("population", 30.0, 2.0),
                P::int("generations", 30.0, 1.0),
                P::real("crossover", 0.8, 0.0),
                P::real("mutation", 0.02, 0.0),
                P::real("elitism", 0.005, 0.0),
                P::int("stall_generations", 5.0, 1.0),
                P::real("validation_fraction", 0.3, 0.0),
                P::int("fitness_rows", 5000.0, 10.0),
                P::int("fitness_trees", 10.0, 1.0),
                P::int("n_trees", 100.0, 1.0),
                TREE_GROWTH[0],
                TREE_GROWTH[2],
                TREE_GROWTH[3],
            ];
                T
            }
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ModelError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDef {
    pub name: &'static str,
    pub default: Option<f64>,
    pub integer: bool,
    pub min: f64,
}

impl ParamDef {
    const fn int(name: &'static str, default: f64, min: f64) -> Self {
        Self { name, default: Some(default), integer: true, min }
    }

    const fn real(name: &'static str, default: f64, min: f64) -> Self {
        Self { name, default: Some(default), integer: false, min }
    }

    const fn derived(name: &'static str) -> Self {
        Self { name, default: None, integer: false, min: 0.0 }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown model kind `{0}`")]
    UnknownKind(String),
    #[error("{kind} has no hyper-parameter `{key}`")]
    UnknownParam { kind: ModelKind, key: String },
    #[error("{kind} hyper-parameter `{key}` = {value}: {reason}")]
    InvalidParam { kind: ModelKind, key: String, value: f64, reason: String },
    #[error("training data is empty")]
    Empty,
    #[error("{0} needs both classes in the training data")]
    SingleClass(ModelKind),
    #[error("{0} gives a binary decision only and cannot score")]
    NoScores(ModelKind),
    #[error("model expects {expected} features, got {actual}")]
    FeatureCount { expected: usize, actual: usize },
    #[error(transparent)]
    Rough(#[from] RoughError),
    #[error("not a model document: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A model kind, its hyper-parameters and its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    /// Validates every key and value against the kind's parameter table.
    pub fn new(kind: ModelKind, params: BTreeMap<String, f64>, seed: u64) -> Result<Self, ModelError> {
        let spec = Self { kind, params, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_defaults(kind: ModelKind, seed: u64) -> Self {
        Self { kind, params: BTreeMap::new(), seed }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let table = self.kind.params();
        for (key, &value) in &self.params {
            let def = table
                .iter()
                .find(|d| d.name == key)
                .ok_or_else(|| ModelError::UnknownParam { kind: self.kind, key: key.clone() })?;
            let invalid = |reason: &str| ModelError::InvalidParam {
                kind: self.kind,
                key: key.clone(),
                value,
                reason: reason.to_string(),
            };
            if !value.is_finite() {
                return Err(invalid("must be finite"));
            }
            if def.integer && value.fract() != 0.0 {
                return Err(invalid("must be an integer"));
            }
            if value < def.min {
                return Err(invalid(&format!("must be at least {}", def.min)));
            }
        }
        Ok(())
    }

    /// Configured value, else the kind's default.
    pub fn get(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied().or_else(|| self.kind.params().iter().find(|d| d.name == key)?.default)
    }

    fn value(&self, key: &str) -> f64 {
        self.get(key).unwrap_or_else(|| panic!("{} has no default for `{key}`", self.kind))
    }

    fn usize(&self, key: &str) -> usize {
        self.value(key) as usize
    }

    fn depth(&self) -> Option<usize> {
        Some(self.usize("max_depth")).filter(|&d| d > 0)
    }

    fn forest_params(&self, strategy: SplitStrategy) -> ForestParams {
        let max_features = match self.get("max_features").unwrap_or(0.0) as usize {
            0 => MaxFeatures::Sqrt,
            n => MaxFeatures::Count(n),
        };
        ForestParams {
            n_trees: self.usize("n_trees"),
            bootstrap: self.get("bootstrap").unwrap_or(1.0) != 0.0,
            tree: TreeParams {
                criterion: Criterion::Entropy,
                strategy,
                max_depth: self.depth(),
                min_samples_split: self.get("min_samples_split").unwrap_or(2.0) as usize,
                min_samples_leaf: self.usize("min_samples_leaf"),
                max_features,
            },
            max_bins: self.usize("max_bins"),
        }
    }

    fn ga_params(&self) -> GaParams {
        GaParams {
            population: self.usize("population"),
            generations: self.usize("generations"),
            crossover_rate: self.value("crossover"),
            mutation_rate: self.value("mutation"),
            elitism: self.value("elitism"),
            stall_generations: self.usize("stall_generations"),
            validation_fraction: self.value("validation_fraction"),
            fitness_rows: self.usize("fitness_rows"),
            fitness_trees: self.usize("fitness_trees"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelState {
    Lr(Logistic),
    Mda(Qda),
    Nb(NaiveBayes),
    Dt(Tree),
    Rf(Forest),
    Et(Forest),
    Ab(AdaBoost),
    Gb(GradientBoosting),
    Svm(LinearSvm),
    Ann(Mlp),
    Rs(RoughClusterModel),
    Ga { columns: Vec<usize>, forest: Forest },
}

/// A fitted classifier. Immutable after fitting and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub feature_names: Vec<String>,
    /// False when an iterative fit stopped at its iteration cap.
    pub converged: bool,
    pub state: ModelState,
}

pub const MODEL_FORMAT: &str = "defaultbench-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    model: TrainedModel,
}

/// Fits `spec` on `train`. Deterministic given the spec's seed.
pub fn fit(spec: &ClassifierSpec, train: &Dataset) -> Result<TrainedModel, ModelError> {
    spec.validate()?;
    if train.n_rows() == 0 {
        return Err(ModelError::Empty);
    }
    if spec.kind != ModelKind::RS && !train.has_both_classes() {
        return Err(ModelError::SingleClass(spec.kind));
    }
    let seed = spec.seed;
    let mut converged = true;
    let state = match spec.kind {
        ModelKind::LR => {
            let params = LogisticParams { l2: spec.value("l2"), max_iter: spec.usize("max_iter"), tol: spec.value("tol") };
            let (model, ok) = linear::fit_logistic(train, &params);
            converged = ok;
            ModelState::Lr(model)
        }
        ModelKind::MDA => ModelState::Mda(discriminant::fit_qda(train, spec.value("reg"))),
        ModelKind::NB => ModelState::Nb(discriminant::fit_naive_bayes(train, spec.value("var_smoothing"))),
        ModelKind::DT => {
            let params = ForestParams {
                n_trees: 1,
                bootstrap: false,
                tree: TreeParams {
                    max_depth: spec.depth(),
                    min_samples_split: spec.usize("min_samples_split"),
                    min_samples_leaf: spec.usize("min_samples_leaf"),
                    ..Default::default()
                },
                max_bins: spec.usize("max_bins"),
            };
            let fit = forest::fit_forest(train, &params, seed);
            ModelState::Dt(fit.forest.trees()[0].clone())
        }
        ModelKind::RF => ModelState::Rf(forest::fit_forest(train, &spec.forest_params(SplitStrategy::Best), seed).forest),
        ModelKind::ET => ModelState::Et(forest::fit_forest(train, &spec.forest_params(SplitStrategy::Random), seed).forest),
        ModelKind::AB => ModelState::Ab(boosting::fit_adaboost(train, spec.usize("n_rounds"), spec.usize("max_bins"), seed).0),
        ModelKind::GB => {
            let params = BoostingParams {
                n_rounds: spec.usize("n_rounds"),
                learning_rate: spec.value("learning_rate"),
                max_depth: spec.usize("max_depth"),
                min_samples_leaf: spec.usize("min_samples_leaf"),
                max_bins: spec.usize("max_bins"),
            };
            ModelState::Gb(boosting::fit_gradient_boosting(train, &params, seed).0)
        }
        ModelKind::SVM => {
            let params = SvmParams { c: spec.value("c"), max_epochs: spec.usize("max_epochs"), tol: spec.value("tol") };
            let (model, ok) = linear::fit_svm(train, &params, seed);
            converged = ok;
            ModelState::Svm(model)
        }
        ModelKind::ANN => {
            let params = MlpParams {
                hidden_layers: spec.usize("hidden_layers"),
                hidden_units: spec.usize("hidden_units"),
                learning_rate: spec.value("learning_rate"),
                epochs: spec.usize("epochs"),
                batch_size: spec.usize("batch_size"),
                l2: spec.value("l2"),
                tol: spec.value("tol"),
            };
            let (model, ok) = mlp::fit_mlp(train, &params, seed);
            converged = ok;
            ModelState::Ann(model)
        }
        ModelKind::RS => {
            let params = RoughParams {
                k: spec.usize("k"),
                epsilon: spec.get("epsilon"),
                epsilon_fraction: spec.value("epsilon_fraction"),
                w_lower: spec.value("w_lower"),
                w_upper: spec.value("w_upper"),
                max_iter: spec.usize("max_iter"),
                ..Default::default()
            };
            let model = rough::rough_kmeans_fit(train, &params, seed)?;
            converged = model.converged();
            ModelState::Rs(model)
        }
        ModelKind::GA => {
            let outcome = ga_select(train, &spec.ga_params(), crate::rng::derive_seed(seed, "ga"));
            let subset = train.select_columns(&outcome.columns);
            let forest = forest::fit_forest(&subset, &spec.forest_params(SplitStrategy::Best), seed).forest;
            ModelState::Ga { columns: outcome.columns, forest }
        }
    };
    Ok(TrainedModel { spec: spec.clone(), feature_names: train.feature_names().to_vec(), converged, state })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn can_score(&self) -> bool {
        self.kind().can_score()
    }

    fn check(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.feature_names.len() {
            return Err(ModelError::FeatureCount { expected: self.feature_names.len(), actual: x.len() });
        }
        Ok(())
    }

    /// Class-1 score in [0, 1]. Errors for RS.
    pub fn score(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check(x)?;
        Ok(match &self.state {
            ModelState::Lr(m) => m.score(x),
            ModelState::Mda(m) => m.score(x),
            ModelState::Nb(m) => m.score(x),
            ModelState::Dt(t) => t.predict(x),
            ModelState::Rf(f) | ModelState::Et(f) => f.vote_share(x),
            ModelState::Ab(m) => m.score(x),
            ModelState::Gb(m) => m.score(x),
            ModelState::Svm(m) => m.score(x),
            ModelState::Ann(m) => m.score(x),
            ModelState::Rs(_) => return Err(ModelError::NoScores(ModelKind::RS)),
            ModelState::Ga { columns, forest } => {
                let sub: Vec<f64> = columns.iter().map(|&c| x[c]).collect();
                forest.vote_share(&sub)
            }
        })
    }

    /// 1 iff the score is at least 0.5; the nearest cluster's label for RS.
    pub fn predict(&self, x: &[f64]) -> Result<u8, ModelError> {
        match &self.state {
            ModelState::Rs(m) => {
                self.check(x)?;
                Ok(m.predict(x))
            }
            _ => Ok(u8::from(self.score(x)? >= 0.5)),
        }
    }

    pub fn score_all(&self, data: &Dataset) -> Result<Vec<f64>, ModelError> {
        data.rows().map(|x| self.score(x)).collect()
    }

    pub fn predict_all(&self, data: &Dataset) -> Result<Vec<u8>, ModelError> {
        data.rows().map(|x| self.predict(x)).collect()
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        let doc = ModelDocument { format: MODEL_FORMAT.into(), version: MODEL_FORMAT_VERSION, model: self.clone() };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => return Err(ModelError::Format(format!("format tag is {other:?}"))),
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_FORMAT_VERSION) => {}
            other => return Err(ModelError::Format(format!("unsupported version {other:?}"))),
        }
        let doc: ModelDocument = serde_json::from_value(value)?;
        doc.model.spec.validate()?;
        Ok(doc.model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()?).map_err(|source| ModelError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}
