//! Discrete AdaBoost over entropy stumps and least-squares gradient boosting.

use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, BinnedMatrix, Criterion, MaxFeatures, SplitStrategy, Tree, TreeParams};
use crate::dataset::Dataset;
use crate::rng::rng_from_seed;

/// Error assigned to a perfect stump so its weight stays finite.
const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    stumps: Vec<Tree>,
    alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaRound {
    /// Weighted error of the stump on the weights it was fitted to.
    pub error: f64,
    pub alpha: f64,
    /// Weighted error of the same stump after the weights were updated.
    pub error_after_update: f64,
}

fn sign(tree: &Tree, x: &[f64]) -> f64 {
    if tree.predict(x) >= 0.5 {
        1.0
    } else {
        -1.0
    }
}

impl AdaBoost {
    /// `0.5 * (1 + F(x) / sum(alpha))`, where `F` is the alpha-weighted vote in {-1, +1}.
    pub fn score(&self, x: &[f64]) -> f64 {
        let total: f64 = self.alphas.iter().sum();
        if total <= 0.0 {
            return 0.5;
        }
        let f: f64 = self.stumps.iter().zip(&self.alphas).map(|(t, a)| a * sign(t, x)).sum();
        (0.5 * (1.0 + f / total)).clamp(0.0, 1.0)
    }

    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    pub fn stumps(&self) -> &[Tree] {
        &self.stumps
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

pub fn fit_adaboost(data: &Dataset, n_rounds: usize, max_bins: usize, seed: u64) -> (AdaBoost, Vec<AdaRound>) {
    let binned = BinnedMatrix::from_dataset(data, max_bins);
    let targets: Vec<f64> = data.labels().iter().map(|&l| f64::from(l)).collect();
    let y: Vec<f64> = data.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let n = data.n_rows();
    let mut weights = vec![1.0 / n as f64; n];
    let params = TreeParams {
        criterion: Criterion::Entropy,
        strategy: SplitStrategy::Best,
        max_depth: Some(1),
        max_features: MaxFeatures::All,
        ..Default::default()
    };
    let mut rng = rng_from_seed(seed);
    let mut model = AdaBoost { stumps: Vec::new(), alphas: Vec::new() };
    let mut trace = Vec::new();
    for _ in 0..n_rounds {
        let stump = fit_tree(&binned, &targets, Some(&weights), (0..n).collect(), &params, &mut rng).tree;
        let h: Vec<f64> = data.rows().map(|x| sign(&stump, x)).collect();
        let error = weighted_error(&weights, &h, &y);
        if error >= 0.5 {
            if model.stumps.is_empty() {
                model.stumps.push(stump);
                model.alphas.push(1.0);
            }
            break;
        }
        let alpha = 0.5 * ((1.0 - error.max(MIN_ERROR)) / error.max(MIN_ERROR)).ln();
        for i in 0..n {
            weights[i] *= (-alpha * y[i] * h[i]).exp();
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        trace.push(AdaRound { error, alpha, error_after_update: weighted_error(&weights, &h, &y) });
        model.stumps.push(stump);
        model.alphas.push(alpha);
        if error <= MIN_ERROR {
            break;
        }
    }
    (model, trace)
}

fn weighted_error(weights: &[f64], h: &[f64], y: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let wrong: f64 = weights.iter().zip(h.iter().zip(y)).filter(|(_, (a, b))| a != b).map(|(w, _)| w).sum();
    wrong / total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_bins: usize,
}

/// Additive model of regression trees fitted to squared-error residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    init: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
}

impl GradientBoosting {
    pub fn raw(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.raw(x).clamp(0.0, 1.0)
    }
}

/// Returns the model and the mean squared training loss before the first and after every round.
pub fn fit_gradient_boosting(data: &Dataset, params: &BoostingParams, seed: u64) -> (GradientBoosting, Vec<f64>) {
    let binned = BinnedMatrix::from_dataset(data, params.max_bins);
    let y: Vec<f64> = data.labels().iter().map(|&l| f64::from(l)).collect();
    let n = y.len();
    let init = y.iter().sum::<f64>() / n as f64;
    let mut f = vec![init; n];
    let tree_params = TreeParams {
        criterion: Criterion::SquaredError,
        strategy: SplitStrategy::Best,
        max_depth: Some(params.max_depth),
        min_samples_leaf: params.min_samples_leaf,
        max_features: MaxFeatures::All,
        ..Default::default()
    };
    let mse = |f: &[f64]| y.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    let mut history = vec![mse(&f)];
    let mut rng = rng_from_seed(seed);
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let residuals: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
        let tree = fit_tree(&binned, &residuals, None, (0..n).collect(), &tree_params, &mut rng).tree;
        for (i, x) in data.rows().enumerate() {
            f[i] += params.learning_rate * tree.predict(x);
        }
        history.push(mse(&f));
        trees.push(tree);
    }
    (GradientBoosting { init, learning_rate: params.learning_rate, trees }, history)
}
