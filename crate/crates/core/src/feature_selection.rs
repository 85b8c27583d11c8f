//! Feature discarding by agreement of three signals: correlation with the
//! label, random-forest importance, and survival in a genetic search.
//!
//! A feature is dropped only when all three call it unimportant.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::evaluation::{confusion, split_indices};
use crate::models::forest::{fit_forest, ForestParams};
use crate::models::tree::{Criterion, MaxFeatures, SplitStrategy, TreeParams};
use crate::rng::{derive_seed, rng_from_seed, StageRng};

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("feature lists differ: `{0}` is missing from one of the inputs")]
    FeatureMismatch(String),
    #[error("feature lists have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Absolute Pearson correlation of every column with the label; constant columns score 0.
pub fn correlation_filter(data: &Dataset) -> Vec<(String, f64)> {
    let y: Vec<f64> = data.labels().iter().map(|&l| f64::from(l)).collect();
    data.feature_names()
        .iter()
        .enumerate()
        .map(|(f, name)| (name.clone(), pearson(&data.column(f), &y).abs()))
        .collect()
}

/// Pearson correlation; 0 when either side has no variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Normalized impurity-decrease importance of a random forest fitted on `data`.
pub fn rf_importance(data: &Dataset, params: &ForestParams, seed: u64) -> Vec<(String, f64)> {
    let fit = fit_forest(data, params, seed);
    data.feature_names().iter().cloned().zip(fit.importances).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Share of the population copied unchanged into the next generation (at least one).
    pub elitism: f64,
    /// Stop once the best mask has not changed for this many generations.
    pub stall_generations: usize,
    /// Share of customers held out to measure fitness.
    pub validation_fraction: f64,
    /// Cap on rows used to train each fitness forest (all positives are kept).
    pub fitness_rows: usize,
    pub fitness_trees: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 30,
            generations: 30,
            crossover_rate: 0.8,
            mutation_rate: 0.02,
            elitism: 0.005,
            stall_generations: 5,
            validation_fraction: 0.3,
            fitness_rows: 5000,
            fitness_trees: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    /// Column indices of the best mask, ascending.
    pub columns: Vec<usize>,
    pub names: Vec<String>,
    pub best_fitness: f64,
    pub generations_run: usize,
    /// Distinct masks whose fitness was computed.
    pub evaluations: usize,
}

type Mask = Vec<bool>;

struct Fitness {
    train: Dataset,
    valid: Dataset,
    forest: ForestParams,
    seed: u64,
    cache: HashMap<Mask, f64>,
}

impl Fitness {
    fn new(data: &Dataset, params: &GaParams, seed: u64) -> Self {
        let (train_idx, valid_idx) = match split_indices(data, params.validation_fraction, derive_seed(seed, "validation")) {
            Ok(parts) => parts,
            // Too few positive customers to hold some out: score on the training rows themselves.
            Err(_) => ((0..data.n_rows()).collect(), (0..data.n_rows()).collect()),
        };
        let mut rng = rng_from_seed(derive_seed(seed, "subsample"));
        let cap = |idx: Vec<usize>, rng: &mut StageRng| -> Vec<usize> {
            if idx.len() <= params.fitness_rows {
                return idx;
            }
            let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| data.labels()[i] == 1);
            neg.shuffle(rng);
            neg.truncate(params.fitness_rows.saturating_sub(pos.len()));
            pos.extend(neg);
            pos.sort_unstable();
            pos
        };
        let train = data.subset_rows(&cap(train_idx, &mut rng));
        let valid = data.subset_rows(&cap(valid_idx, &mut rng));
        let forest = ForestParams {
            n_trees: params.fitness_trees.max(1),
            bootstrap: true,
            tree: TreeParams {
                criterion: Criterion::Entropy,
                strategy: SplitStrategy::Best,
                max_features: MaxFeatures::Sqrt,
                ..Default::default()
            },
            max_bins: 64,
        };
        Self { train, valid, forest, seed, cache: HashMap::new() }
    }

    fn score(&self, mask: &[bool]) -> f64 {
        let columns: Vec<usize> = mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        let train = self.train.select_columns(&columns);
        if !train.has_both_classes() {
            return 0.0;
        }
        let forest = fit_forest(&train, &self.forest, derive_seed(self.seed, "fitness")).forest;
        let predicted: Vec<u8> = self
            .valid
            .rows()
            .map(|x| {
                let sub: Vec<f64> = columns.iter().map(|&c| x[c]).collect();
                u8::from(forest.vote_share(&sub) >= 0.5)
            })
            .collect();
        confusion(self.valid.labels(), &predicted).ok().and_then(|cm| cm.recall()).unwrap_or(0.0)
    }

    /// Fitness of every mask, computing unseen ones in parallel.
    fn evaluate(&mut self, population: &[Mask]) -> Vec<f64> {
        let mut fresh: Vec<Mask> = population.iter().filter(|m| !self.cache.contains_key(*m)).cloned().collect();
        fresh.sort();
        fresh.dedup();
        let scores: Vec<f64> = fresh.par_iter().map(|m| self.score(m)).collect();
        self.cache.extend(fresh.into_iter().zip(scores));
        population.iter().map(|m| self.cache[m]).collect()
    }
}

fn repair(mask: &mut Mask, rng: &mut StageRng) {
    if !mask.iter().any(|&b| b) {
        let i = rng.gen_range(0..mask.len());
        mask[i] = true;
    }
}

fn roulette(fitness: &[f64], rng: &mut StageRng) -> usize {
    let total: f64 = fitness.iter().sum();
    if total <= 0.0 {
        return rng.gen_range(0..fitness.len());
    }
    let mut r = rng.gen::<f64>() * total;
    for (i, &f) in fitness.iter().enumerate() {
        if r < f {
            return i;
        }
        r -= f;
    }
    fitness.iter().rposition(|&f| f > 0.0).unwrap_or(0)
}

/// Genetic search over feature masks from a random initial population.
pub fn ga_select(data: &Dataset, params: &GaParams, seed: u64) -> GaOutcome {
    let mut rng = rng_from_seed(derive_seed(seed, "population"));
    let d = data.n_features();
    let population: Vec<Mask> = (0..params.population.max(2))
        .map(|_| {
            let mut m: Mask = (0..d).map(|_| rng.gen_bool(0.5)).collect();
            repair(&mut m, &mut rng);
            m
        })
        .collect();
    ga_select_from(data, params, seed, population)
}

/// Genetic search from a given initial population.
pub fn ga_select_from(data: &Dataset, params: &GaParams, seed: u64, initial: Vec<Vec<bool>>) -> GaOutcome {
    let d = data.n_features();
    let mut rng = rng_from_seed(derive_seed(seed, "evolution"));
    let mut fitness_fn = Fitness::new(data, params, seed);
    let mut population: Vec<Mask> = initial;
    for m in population.iter_mut() {
        m.resize(d, false);
        repair(m, &mut rng);
    }
    let size = population.len();
    let elite_count = ((params.elitism * size as f64).ceil() as usize).clamp(1, size);

    let mut best: Option<(Mask, f64)> = None;
    let mut stall = 0;
    let mut generations_run = 0;
    for _ in 0..params.generations.max(1) {
        generations_run += 1;
        let fitness = fitness_fn.evaluate(&population);
        let mut ranked: Vec<usize> = (0..size).collect();
        ranked.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
        let leader = ranked[0];
        let improved = match &best {
            Some((_, f)) => fitness[leader] > *f,
            None => true,
        };
        if improved {
            best = Some((population[leader].clone(), fitness[leader]));
            stall = 0;
        } else {
            stall += 1;
            if stall >= params.stall_generations.max(1) {
                break;
            }
        }

        let mut next: Vec<Mask> = ranked[..elite_count].iter().map(|&i| population[i].clone()).collect();
        while next.len() < size {
            let a = &population[roulette(&fitness, &mut rng)];
            let b = &population[roulette(&fitness, &mut rng)];
            let (mut c1, mut c2) = (a.clone(), b.clone());
            if d >= 2 && rng.gen::<f64>() < params.crossover_rate {
                let point = rng.gen_range(1..d);
                c1[point..].copy_from_slice(&b[point..]);
                c2[point..].copy_from_slice(&a[point..]);
            }
            for child in [&mut c1, &mut c2] {
                for bit in child.iter_mut() {
                    if rng.gen::<f64>() < params.mutation_rate {
                        *bit = !*bit;
                    }
                }
                repair(child, &mut rng);
            }
            next.push(c1);
            if next.len() < size {
                next.push(c2);
            }
        }
        population = next;
    }
    let (mask, best_fitness) = best.expect("at least one generation ran");
    let columns: Vec<usize> = mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    GaOutcome {
        names: columns.iter().map(|&c| data.feature_names()[c].clone()).collect(),
        columns,
        best_fitness,
        generations_run,
        evaluations: fitness_fn.cache.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Importance below this counts as "no importance".
    pub importance: f64,
    /// Absolute correlation below this counts as negligible.
    pub correlation: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { importance: 1e-6, correlation: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVerdict {
    pub feature: String,
    pub rf_importance: f64,
    pub ga_survived: bool,
    pub corr_with_target: f64,
    pub discarded: bool,
}

/// One verdict per feature, in the order of `corr`. A feature is discarded only when its
/// importance and correlation are both below threshold and the genetic search dropped it.
pub fn crosscheck_discard(
    corr: &[(String, f64)],
    importance: &[(String, f64)],
    ga_survivors: &BTreeSet<String>,
    thresholds: &Thresholds,
) -> Result<Vec<FeatureVerdict>, SelectionError> {
    if corr.len() != importance.len() {
        return Err(SelectionError::LengthMismatch(corr.len(), importance.len()));
    }
    let imp: HashMap<&str, f64> = importance.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    if let Some(extra) = ga_survivors.iter().find(|n| !imp.contains_key(n.as_str())) {
        return Err(SelectionError::FeatureMismatch(extra.clone()));
    }
    corr.iter()
        .map(|(name, c)| {
            let rf = *imp.get(name.as_str()).ok_or_else(|| SelectionError::FeatureMismatch(name.clone()))?;
            let survived = ga_survivors.contains(name);
            let discarded = rf < thresholds.importance && !survived && c.abs() < thresholds.correlation;
            Ok(FeatureVerdict {
                feature: name.clone(),
                rf_importance: rf,
                ga_survived: survived,
                corr_with_target: c.abs(),
                discarded,
            })
        })
        .collect()
}

/// Verdict table with the wrapper (importance) and filter (correlation) columns.
pub fn write_verdicts_csv<W: Write>(verdicts: &[FeatureVerdict], writer: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["feature", "wrapper", "filter", "ga_survived", "discarded"])?;
    for v in verdicts {
        out.write_record([
            v.feature.clone(),
            format!("{:.6}", v.rf_importance),
            format!("{:.6}", v.corr_with_target),
            v.ga_survived.to_string(),
            v.discarded.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub enabled: bool,
    pub thresholds: Thresholds,
    pub forest_trees: usize,
    pub forest_max_depth: usize,
    pub ga: GaParams,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { enabled: true, thresholds: Thresholds::default(), forest_trees: 100, forest_max_depth: 0, ga: GaParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub verdicts: Vec<FeatureVerdict>,
    /// Names of retained features, in dataset order.
    pub kept: Vec<String>,
}

/// Runs all three signals on `data` and crosschecks them. Never discards every feature:
/// if all would go, the one most correlated with the label is kept.
pub fn select_features(data: &Dataset, config: &SelectionConfig, seed: u64) -> SelectionReport {
    let corr = correlation_filter(data);
    let forest = ForestParams {
        n_trees: config.forest_trees.max(1),
        bootstrap: true,
        tree: TreeParams {
            max_features: MaxFeatures::Sqrt,
            max_depth: Some(config.forest_max_depth).filter(|&d| d > 0),
            ..Default::default()
        },
        max_bins: 256,
    };
    let importance = rf_importance(data, &forest, derive_seed(seed, "importance"));
    let survivors: BTreeSet<String> = ga_select(data, &config.ga, derive_seed(seed, "ga")).names.into_iter().collect();
    let verdicts =
        crosscheck_discard(&corr, &importance, &survivors, &config.thresholds).expect("inputs share the dataset's features");
    let mut kept: Vec<String> = verdicts.iter().filter(|v| !v.discarded).map(|v| v.feature.clone()).collect();
    if kept.is_empty() {
        let top = verdicts.iter().max_by(|a, b| a.corr_with_target.total_cmp(&b.corr_with_target)).expect("features");
        kept.push(top.feature.clone());
    }
    SelectionReport { verdicts, kept }
}
