//! Random forests and extremely randomized trees.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, BinnedMatrix, Tree, TreeParams};
use crate::dataset::Dataset;
use crate::rng::{derive_indexed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
    pub max_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub fn from_trees(trees: Vec<Tree>) -> Self {
        Self { trees }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Share of trees voting for class 1.
    pub fn vote_share(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        let votes = self.trees.iter().filter(|t| t.predict(x) >= 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct ForestFit {
    pub forest: Forest,
    /// Mean per-tree impurity-decrease share of each feature; sums to 1 unless no tree split.
    pub importances: Vec<f64>,
}

/// Grows `n_trees` classification trees, each from its own derived seed.
pub fn fit_forest(data: &Dataset, params: &ForestParams, seed: u64) -> ForestFit {
    let binned = BinnedMatrix::from_dataset(data, params.max_bins);
    let targets: Vec<f64> = data.labels().iter().map(|&l| f64::from(l)).collect();
    let n = data.n_rows();
    let fits: Vec<_> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_indexed(seed, "tree", t as u64));
            let rows = if params.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
            fit_tree(&binned, &targets, None, rows, &params.tree, &mut rng)
        })
        .collect();

    let mut importances = vec![0.0; data.n_features()];
    for fit in &fits {
        let total: f64 = fit.importances.iter().sum();
        if total > 0.0 {
            for (acc, v) in importances.iter_mut().zip(&fit.importances) {
                *acc += v / total;
            }
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    }
    ForestFit { forest: Forest { trees: fits.into_iter().map(|f| f.tree).collect() }, importances }
}
