//! Holdout splitting, metrics, the original-vs-resampled experiment protocol,
//! and ranking of its results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::loan_data::Regime;
use crate::models::{fit, ClassifierSpec, ModelKind};
use crate::resampling::{smote, ResampleConfig};
use crate::rng::{derive_indexed, rng_from_seed};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} truth labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("ROC-AUC needs both classes in the truth labels")]
    SingleClass,
    #[error("cannot stratify: only {0} customer(s) with a default")]
    CannotStratify(usize),
    #[error("holdout fraction {0} is not in (0, 1)")]
    InvalidFraction(f64),
    #[error("no reports to summarise")]
    NoReports,
    #[error("both variants are needed for a comparison; missing {0}")]
    MissingVariant(Variant),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// TP / (TP + FP); undefined without positive predictions.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// TP / (TP + FN); undefined without positive truth labels.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// FP / (FP + TN); undefined without negative truth labels.
    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t != 0, p != 0) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fpr: Option<f64>,
    pub accuracy: Option<f64>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    Metrics { precision: cm.precision(), recall: cm.recall(), fpr: cm.fpr(), accuracy: cm.accuracy() }
}

/// Trapezoidal area under the ROC curve. Equal scores form one threshold step,
/// which makes the area equal to the probability that a random positive
/// outscores a random negative, ties counting one half.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<f64, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), scores.len()));
    }
    let positives = y_true.iter().filter(|&&y| y != 0).count() as u128;
    let negatives = y_true.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // Twice the area, in units of one positive x one negative.
    let mut doubled: u128 = 0;
    let mut tp_before: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let (mut tp, mut fp) = (0u128, 0u128);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&s).is_eq() {
            if y_true[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        doubled += fp * (2 * tp_before + tp);
        tp_before += tp;
    }
    Ok(doubled as f64 / (2 * positives * negatives) as f64)
}

/// Customers grouped by whether any of their rows is positive, each list sorted.
fn strata(data: &Dataset) -> (Vec<u32>, Vec<u32>) {
    let mut status: BTreeMap<u32, bool> = BTreeMap::new();
    for (&g, &l) in data.groups().iter().zip(data.labels()) {
        *status.entry(g).or_insert(false) |= l == 1;
    }
    let (pos, neg): (Vec<_>, Vec<_>) = status.into_iter().partition(|(_, d)| *d);
    (pos.into_iter().map(|(g, _)| g).collect(), neg.into_iter().map(|(g, _)| g).collect())
}

fn rows_of(data: &Dataset, chosen: &BTreeSet<u32>) -> (Vec<usize>, Vec<usize>) {
    (0..data.n_rows()).partition(|&i| !chosen.contains(&data.groups()[i]))
}

/// Customer-level stratified split; returns `(train rows, holdout rows)`.
///
/// Every customer's rows fall on one side. Each stratum contributes
/// `round(fraction * size)` customers to the holdout, and the defaulting
/// stratum always has at least one customer on each side.
pub fn split_indices(data: &Dataset, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::InvalidFraction(fraction));
    }
    let (mut pos, mut neg) = strata(data);
    if pos.len() <= 1 {
        return Err(EvalError::CannotStratify(pos.len()));
    }
    let mut rng = rng_from_seed(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let take = |n: usize| ((fraction * n as f64).round() as usize).clamp(usize::from(n > 1), n.saturating_sub(1));
    let mut held: BTreeSet<u32> = pos[..take(pos.len())].iter().copied().collect();
    held.extend(neg[..take(neg.len())].iter().copied());
    Ok(rows_of(data, &held))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self { holdout_fraction: 0.30, seed: 0 }
    }
}

/// Training set and holdout set; the holdout is flagged so it cannot be resampled.
pub fn split(data: &Dataset, plan: &SplitPlan) -> Result<(Dataset, Dataset), EvalError> {
    let (train, holdout) = split_indices(data, plan.holdout_fraction, plan.seed)?;
    Ok((data.subset_rows(&train), data.subset_rows(&holdout).into_holdout()))
}

/// `k` customer-level folds, stratified on defaulting customers; returns row indices per fold.
pub fn stratified_group_folds(data: &Dataset, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let k = k.max(1);
    let (mut pos, mut neg) = strata(data);
    let mut rng = rng_from_seed(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold_of: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, g) in pos.iter().chain(&neg).enumerate() {
        fold_of.insert(*g, i % k);
    }
    let mut folds = vec![Vec::new(); k];
    for (i, g) in data.groups().iter().enumerate() {
        folds[fold_of[g]].push(i);
    }
    folds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Original,
    Resampled,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "Original",
            Variant::Resampled => "Resampled",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Original" => Ok(Variant::Original),
            "Resampled" => Ok(Variant::Resampled),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

/// Outcome of one (vintage, model, variant) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: ModelKind,
    pub variant: Variant,
    pub vintage_year: u16,
    pub regime: Regime,
    pub confusion: ConfusionMatrix,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fpr: Option<f64>,
    pub accuracy: Option<f64>,
    /// Not applicable for RS.
    pub roc_auc: Option<f64>,
    /// Wall-clock seconds spent in `fit` only.
    pub fit_seconds: f64,
    pub holdout_checksum: String,
    pub train_rows: usize,
    pub converged: bool,
    /// Set when the cell failed; metrics are then undefined.
    pub error: Option<String>,
}

/// One vintage's encoded, feature-selected data.
#[derive(Debug, Clone)]
pub struct VintageData {
    pub year: u16,
    pub regime: Regime,
    pub data: Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub holdout_fraction: f64,
    /// `seed` here is replaced per vintage by a seed derived from the root seed.
    pub resample: ResampleConfig,
    pub seed: u64,
}

/// Per-vintage holdout information, kept for integrity checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VintageSplit {
    pub year: u16,
    pub train_rows: usize,
    pub holdout_rows: usize,
    pub resampled_rows: usize,
    pub holdout_checksum: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub reports: Vec<MetricsReport>,
    pub splits: Vec<VintageSplit>,
    /// Vintages that could not be split or resampled, with the reason.
    pub skipped: Vec<(u16, String)>,
}

fn evaluate_cell(
    spec: &ClassifierSpec,
    vintage: &VintageData,
    variant: Variant,
    train: &Dataset,
    holdout: &Dataset,
) -> MetricsReport {
    let mut report = MetricsReport {
        model: spec.kind,
        variant,
        vintage_year: vintage.year,
        regime: vintage.regime,
        confusion: ConfusionMatrix::default(),
        precision: None,
        recall: None,
        fpr: None,
        accuracy: None,
        roc_auc: None,
        fit_seconds: 0.0,
        holdout_checksum: holdout.checksum(),
        train_rows: train.n_rows(),
        converged: false,
        error: None,
    };
    let mut cell_spec = spec.clone();
    cell_spec.seed = derive_indexed(spec.seed, "vintage", u64::from(vintage.year));
    let started = Instant::now();
    let fitted = fit(&cell_spec, train);
    report.fit_seconds = started.elapsed().as_secs_f64();
    let model = match fitted {
        Ok(m) => m,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.converged = model.converged;
    let outcome = (|| -> Result<(), String> {
        let predicted = model.predict_all(holdout).map_err(|e| e.to_string())?;
        let cm = confusion(holdout.labels(), &predicted).map_err(|e| e.to_string())?;
        let m = metrics(&cm);
        report.confusion = cm;
        report.precision = m.precision;
        report.recall = m.recall;
        report.fpr = m.fpr;
        report.accuracy = m.accuracy;
        if model.can_score() {
            let scores = model.score_all(holdout).map_err(|e| e.to_string())?;
            report.roc_auc = roc_auc(holdout.labels(), &scores).ok();
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        report.error = Some(e);
    }
    report
}

/// For each vintage: one split; every model fitted on the training split (Original) and on
/// its SMOTE-resampled copy (Resampled), both evaluated on the same holdout.
/// A failing cell is recorded with its error; the run continues.
pub fn run_experiment(vintages: &[VintageData], specs: &[ClassifierSpec], options: &ExperimentOptions) -> ExperimentOutcome {
    let mut reports = Vec::new();
    let mut splits = Vec::new();
    let mut skipped = Vec::new();
    for vintage in vintages {
        let year = u64::from(vintage.year);
        let plan = SplitPlan { holdout_fraction: options.holdout_fraction, seed: derive_indexed(options.seed, "split", year) };
        let (train, holdout) = match split(&vintage.data, &plan) {
            Ok(parts) => parts,
            Err(e) => {
                skipped.push((vintage.year, e.to_string()));
                continue;
            }
        };
        let resample_cfg = ResampleConfig { seed: derive_indexed(options.seed, "smote", year), ..options.resample };
        let resampled = match smote(&train, &resample_cfg) {
            Ok(r) => r,
            Err(e) => {
                skipped.push((vintage.year, e.to_string()));
                continue;
            }
        };
        splits.push(VintageSplit {
            year: vintage.year,
            train_rows: train.n_rows(),
            holdout_rows: holdout.n_rows(),
            resampled_rows: resampled.n_rows(),
            holdout_checksum: holdout.checksum(),
        });
        let cells: Vec<(usize, Variant)> =
            (0..specs.len()).flat_map(|i| [(i, Variant::Original), (i, Variant::Resampled)]).collect();
        let cell_reports: Vec<MetricsReport> = cells
            .par_iter()
            .map(|&(i, variant)| {
                let data = if variant == Variant::Original { &train } else { &resampled };
                evaluate_cell(&specs[i], vintage, variant, data, &holdout)
            })
            .collect();
        reports.extend(cell_reports);
    }
    ExperimentOutcome { reports, splits, skipped }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankMetric {
    Precision,
    Recall,
    RocAuc,
}

impl RankMetric {
    pub const ALL: [RankMetric; 3] = [RankMetric::Precision, RankMetric::Recall, RankMetric::RocAuc];

    pub fn of(self, r: &MetricsReport) -> Option<f64> {
        match self {
            RankMetric::Precision => r.precision,
            RankMetric::Recall => r.recall,
            RankMetric::RocAuc => r.roc_auc,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            RankMetric::Precision => "Precision",
            RankMetric::Recall => "Recall",
            RankMetric::RocAuc => "ROC-AUC",
        }
    }
}

impl FromStr for RankMetric {
    type Err = String;

    /// Accuracy is deliberately not accepted: it is not a ranking metric under heavy imbalance.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "precision" => Ok(RankMetric::Precision),
            "recall" => Ok(RankMetric::Recall),
            "rocauc" | "auc" => Ok(RankMetric::RocAuc),
            other => Err(format!("`{other}` is not a ranking metric (precision, recall, roc-auc)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    EntirePeriod,
    Regime(Regime),
}

impl Scope {
    fn includes(self, r: &MetricsReport) -> bool {
        match self {
            Scope::EntirePeriod => true,
            Scope::Regime(regime) => r.regime == regime,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow {
    pub rank: usize,
    /// Model name, with "-R" appended for the resampled variant.
    pub label: String,
    pub model: ModelKind,
    pub variant: Variant,
    /// Mean over the cells where the metric is defined; `None` if it never is.
    pub mean: Option<f64>,
    pub cells: usize,
}

pub fn variant_label(model: ModelKind, variant: Variant) -> String {
    match variant {
        Variant::Original => model.to_string(),
        Variant::Resampled => format!("{model}-R"),
    }
}

/// Mean metric per (model, variant) over the scope, best first; ties by label,
/// undefined means last.
pub fn rank(reports: &[MetricsReport], metric: RankMetric, scope: Scope) -> Result<Vec<RankRow>, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::NoReports);
    }
    let mut groups: BTreeMap<(ModelKind, Variant), (f64, usize, usize)> = BTreeMap::new();
    for r in reports.iter().filter(|r| scope.includes(r)) {
        let entry = groups.entry((r.model, r.variant)).or_insert((0.0, 0, 0));
        entry.2 += 1;
        if let Some(v) = metric.of(r) {
            entry.0 += v;
            entry.1 += 1;
        }
    }
    let mut rows: Vec<RankRow> = groups
        .into_iter()
        .map(|((model, variant), (sum, defined, cells))| RankRow {
            rank: 0,
            label: variant_label(model, variant),
            model,
            variant,
            mean: (defined > 0).then(|| sum / defined as f64),
            cells,
        })
        .collect();
    rows.sort_by(|a, b| match (a.mean, b.mean) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.label.cmp(&b.label)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.label.cmp(&b.label),
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantComparison {
    /// (metric name, Original mean, Resampled mean).
    pub rows: Vec<(String, Option<f64>, Option<f64>)>,
}

impl VariantComparison {
    pub fn get(&self, metric: &str) -> Option<(Option<f64>, Option<f64>)> {
        self.rows.iter().find(|r| r.0 == metric).map(|r| (r.1, r.2))
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Grand mean of each metric over all (model, vintage) cells, per variant.
pub fn compare_variants(reports: &[MetricsReport]) -> Result<VariantComparison, EvalError> {
    for v in [Variant::Original, Variant::Resampled] {
        if !reports.iter().any(|r| r.variant == v) {
            return Err(EvalError::MissingVariant(v));
        }
    }
    type Getter = fn(&MetricsReport) -> Option<f64>;
    let getters: [(&str, Getter); 5] = [
        ("accuracy", |r| r.accuracy),
        ("precision", |r| r.precision),
        ("recall", |r| r.recall),
        ("fpr", |r| r.fpr),
        ("roc_auc", |r| r.roc_auc),
    ];
    let rows = getters
        .iter()
        .map(|(name, get)| {
            let of = |v: Variant| mean_of(reports.iter().filter(|r| r.variant == v).map(get));
            (name.to_string(), of(Variant::Original), of(Variant::Resampled))
        })
        .collect();
    Ok(VariantComparison { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub model: ModelKind,
    /// Mean over every fit of the model, both variants.
    pub mean_seconds: f64,
    pub original_seconds: Option<f64>,
    pub resampled_seconds: Option<f64>,
    pub fits: usize,
}

/// Mean fit seconds per model, averaged over vintages; fastest first.
pub fn timing_table(reports: &[MetricsReport]) -> Vec<TimingRow> {
    let kinds: BTreeSet<ModelKind> = reports.iter().map(|r| r.model).collect();
    let mut rows: Vec<TimingRow> = kinds
        .into_iter()
        .map(|model| {
            let of = |variant: Option<Variant>| {
                mean_of(
                    reports
                        .iter()
                        .filter(|r| r.model == model && variant.is_none_or(|v| r.variant == v))
                        .map(|r| Some(r.fit_seconds)),
                )
            };
            TimingRow {
                model,
                mean_seconds: of(None).unwrap_or(0.0),
                original_seconds: of(Some(Variant::Original)),
                resampled_seconds: of(Some(Variant::Resampled)),
                fits: reports.iter().filter(|r| r.model == model).count(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.mean_seconds.total_cmp(&b.mean_seconds).then(a.model.cmp(&b.model)));
    rows
}
