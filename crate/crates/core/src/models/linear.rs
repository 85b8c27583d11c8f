//! Logistic regression (Newton steps) and a linear SVM (dual coordinate descent).

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::rng::rng_from_seed;

/// Per-column z-scoring fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let n = data.n_rows().max(1) as f64;
        let d = data.n_features();
        let mut mean = vec![0.0; d];
        for x in data.rows() {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for x in data.rows() {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var.into_iter().map(|s| (s / n).sqrt()).map(|s| if s > 0.0 { s } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn identity(d: usize) -> Self {
        Self { mean: vec![0.0; d], scale: vec![1.0; d] }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.scale) {
            *o = (v - m) / s;
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    standardizer: Standardizer,
    weights: Vec<f64>,
    bias: f64,
}

impl Logistic {
    /// Model with explicit weights on unscaled features.
    pub fn from_parts(weights: Vec<f64>, bias: f64) -> Self {
        Self { standardizer: Standardizer::identity(weights.len()), weights, bias }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.apply(x);
        self.bias + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// L2 penalty on the (standardized) weights; the bias is not penalised.
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

/// Penalised maximum likelihood by Newton's method. Returns the model and whether it converged.
pub fn fit_logistic(data: &Dataset, params: &LogisticParams) -> (Logistic, bool) {
    let standardizer = Standardizer::fit(data);
    let d = data.n_features();
    let p = d + 1;
    let rows: Vec<Vec<f64>> = data
        .rows()
        .map(|x| {
            let mut z = standardizer.apply(x);
            z.push(1.0);
            z
        })
        .collect();
    let y: Vec<f64> = data.labels().iter().map(|&l| f64::from(l)).collect();
    let mut beta = DVector::<f64>::zeros(p);
    let mut converged = false;
    for _ in 0..params.max_iter {
        let mut grad = DVector::<f64>::zeros(p);
        // Lower triangle, row-major, so the inner loop runs over contiguous memory.
        let mut lower = vec![0.0; p * p];
        for (z, &t) in rows.iter().zip(&y) {
            let eta: f64 = z.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let mu = sigmoid(eta);
            let w = (mu * (1.0 - mu)).max(1e-12);
            for j in 0..p {
                grad[j] += (mu - t) * z[j];
                let wz = w * z[j];
                for (h, zk) in lower[j * p..=j * p + j].iter_mut().zip(&z[..=j]) {
                    *h += wz * zk;
                }
            }
        }
        let mut hess = DMatrix::<f64>::from_fn(p, p, |j, k| if k <= j { lower[j * p + k] } else { lower[k * p + j] });
        for j in 0..d {
            grad[j] += params.l2 * beta[j];
            hess[(j, j)] += params.l2;
        }
        hess[(d, d)] += 1e-9;
        let Some(chol) = hess.clone().cholesky() else { break };
        let step = chol.solve(&grad);
        beta -= &step;
        if step.amax() < params.tol {
            converged = true;
            break;
        }
    }
    let weights = beta.iter().take(d).copied().collect();
    (Logistic { standardizer, weights, bias: beta[d] }, converged)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Hinge-loss weight against the unit L2 penalty.
    pub c: f64,
    pub max_epochs: usize,
    /// Stop when the projected-gradient spread falls below this.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    standardizer: Standardizer,
    weights: Vec<f64>,
    bias: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.apply(x);
        self.bias + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Logistic squashing of the signed margin: monotone, 0.5 on the hyperplane.
    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

/// Hinge loss with L2 penalty, solved in the dual one coordinate at a time.
/// The bias is learned as the weight of a constant feature.
pub fn fit_svm(data: &Dataset, params: &SvmParams, seed: u64) -> (LinearSvm, bool) {
    let standardizer = Standardizer::fit(data);
    let d = data.n_features();
    let rows: Vec<Vec<f64>> = data
        .rows()
        .map(|x| {
            let mut z = standardizer.apply(x);
            z.push(1.0);
            z
        })
        .collect();
    let y: Vec<f64> = data.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let n = rows.len();
    let q: Vec<f64> = rows.iter().map(|z| z.iter().map(|v| v * v).sum()).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    let mut converged = false;
    for _ in 0..params.max_epochs {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let z = &rows[i];
            let g = y[i] * z.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= params.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 && q[i] > 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, params.c);
                let delta = (alpha[i] - old) * y[i];
                for (wj, zj) in w.iter_mut().zip(z) {
                    *wj += delta * zj;
                }
            }
        }
        if pg_max - pg_min < params.tol {
            converged = true;
            break;
        }
    }
    let bias = w[d];
    w.truncate(d);
    (LinearSvm { standardizer, weights: w, bias }, converged)
}
