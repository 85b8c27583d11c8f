//! Quadratic discriminant analysis and naive Bayes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linear::{sigmoid, Standardizer};
use crate::dataset::{ColumnKind, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Gaussian {
    mean: Vec<f64>,
    /// Row-major inverse covariance.
    precision: Vec<f64>,
    log_det: f64,
    log_prior: f64,
}

impl Gaussian {
    fn log_density(&self, z: &[f64]) -> f64 {
        let d = z.len();
        let diff: Vec<f64> = z.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let mut quad = 0.0;
        for i in 0..d {
            let row = &self.precision[i * d..(i + 1) * d];
            quad += diff[i] * row.iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>();
        }
        self.log_prior - 0.5 * (self.log_det + quad)
    }
}

/// One Gaussian per class with its own covariance, regularised by `reg * I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qda {
    standardizer: Standardizer,
    classes: [Gaussian; 2],
}

impl Qda {
    pub fn log_odds(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.apply(x);
        self.classes[1].log_density(&z) - self.classes[0].log_density(&z)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_odds(x))
    }
}

pub fn fit_qda(data: &Dataset, reg: f64) -> Qda {
    let standardizer = Standardizer::fit(data);
    let d = data.n_features();
    let n = data.n_rows() as f64;
    let fit_class = |label: u8| {
        let rows: Vec<Vec<f64>> = data
            .rows()
            .zip(data.labels())
            .filter(|(_, &l)| l == label)
            .map(|(x, _)| standardizer.apply(x))
            .collect();
        let m = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for z in &rows {
            for (a, b) in mean.iter_mut().zip(z) {
                *a += b / m;
            }
        }
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for z in &rows {
            let diff = DVector::from_iterator(d, z.iter().zip(&mean).map(|(a, b)| a - b));
            cov += &diff * diff.transpose();
        }
        cov /= m;
        for i in 0..d {
            cov[(i, i)] += reg;
        }
        let chol = cov.cholesky().expect("regularised covariance is positive definite");
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let inv = chol.inverse();
        let precision = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| inv[(i, j)]).collect();
        Gaussian { mean, precision, log_det, log_prior: (rows.len() as f64 / n).ln() }
    };
    let classes = [fit_class(0), fit_class(1)];
    Qda { standardizer, classes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ColumnLikelihood {
    Gaussian { mean: [f64; 2], var: [f64; 2] },
    /// Log-probabilities per class and code, add-one smoothed.
    Categorical { log_prob: [Vec<f64>; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    log_prior: [f64; 2],
    columns: Vec<ColumnLikelihood>,
}

impl NaiveBayes {
    pub fn log_odds(&self, x: &[f64]) -> f64 {
        let mut lp = self.log_prior;
        for (col, &v) in self.columns.iter().zip(x) {
            for c in 0..2 {
                lp[c] += match col {
                    ColumnLikelihood::Gaussian { mean, var } => {
                        -0.5 * ((2.0 * std::f64::consts::PI * var[c]).ln() + (v - mean[c]).powi(2) / var[c])
                    }
                    ColumnLikelihood::Categorical { log_prob } => {
                        let code = (v.round().max(0.0) as usize).min(log_prob[c].len() - 1);
                        log_prob[c][code]
                    }
                };
            }
        }
        lp[1] - lp[0]
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_odds(x))
    }
}

/// Gaussian likelihoods for numeric columns, add-one smoothed frequencies for categorical ones.
/// `var_smoothing` times the largest column variance is added to every variance.
pub fn fit_naive_bayes(data: &Dataset, var_smoothing: f64) -> NaiveBayes {
    let counts = [data.n_rows() - data.positives(), data.positives()];
    let n = data.n_rows() as f64;
    let log_prior = [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()];
    let max_var = (0..data.n_features())
        .map(|f| {
            let col = data.column(f);
            let m = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
        })
        .fold(0.0, f64::max);
    let epsilon = (var_smoothing * max_var).max(1e-12);
    let columns = data
        .kinds()
        .iter()
        .enumerate()
        .map(|(f, kind)| match kind {
            ColumnKind::Numeric => {
                let mut mean = [0.0; 2];
                let mut var = [0.0; 2];
                for (v, &l) in data.column(f).iter().zip(data.labels()) {
                    mean[l as usize] += v;
                }
                for c in 0..2 {
                    mean[c] /= counts[c].max(1) as f64;
                }
                for (v, &l) in data.column(f).iter().zip(data.labels()) {
                    var[l as usize] += (v - mean[l as usize]).powi(2);
                }
                for c in 0..2 {
                    var[c] = var[c] / counts[c].max(1) as f64 + epsilon;
                }
                ColumnLikelihood::Gaussian { mean, var }
            }
            ColumnKind::Categorical { levels } => {
                let levels = (*levels).max(1) as usize;
                let mut freq = [vec![0usize; levels], vec![0usize; levels]];
                for (v, &l) in data.column(f).iter().zip(data.labels()) {
                    let code = (v.round().max(0.0) as usize).min(levels - 1);
                    freq[l as usize][code] += 1;
                }
                let log_prob = [0, 1].map(|c| {
                    let denom = (counts[c] + levels) as f64;
                    freq[c].iter().map(|&k| ((k + 1) as f64 / denom).ln()).collect()
                });
                ColumnLikelihood::Categorical { log_prob }
            }
        })
        .collect();
    NaiveBayes { log_prior, columns }
}
