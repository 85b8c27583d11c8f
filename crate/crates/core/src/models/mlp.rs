//! Multilayer perceptron: ReLU hidden layers, sigmoid output, cross-entropy loss, Adam.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::{sigmoid, Standardizer};
use crate::dataset::Dataset;
use crate::rng::{rng_from_seed, StageRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty on weights (not biases).
    pub l2: f64,
    /// Relative change in epoch loss under which training counts as converged.
    pub tol: f64,
}

/// Layer sizes plus a flat parameter vector: per layer, the `out x in` weights row-major, then the biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Network {
    pub fn new(sizes: Vec<usize>, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), Self::param_count(&sizes), "parameter count does not match layer sizes");
        Self { sizes, params }
    }

    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// He-initialised weights, zero biases.
    pub fn random(sizes: Vec<usize>, rng: &mut StageRng) -> Self {
        let mut params = Vec::with_capacity(Self::param_count(&sizes));
        for w in sizes.windows(2) {
            let sd = (2.0 / w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                let v: f64 = rng.gen();
                params.push(sd * (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos());
            }
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Self { sizes, params }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Output-layer pre-activation; fills `acts` with every layer's activations.
    fn forward(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        acts.clear();
        acts.push(x.to_vec());
        let mut offset = 0;
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let input = &acts[l];
            let mut out: Vec<f64> = (0..n_out)
                .map(|o| bias[o] + weights[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            if l < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
            offset += n_in * n_out + n_out;
        }
        acts[acts.len() - 1][0]
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.forward(x, &mut Vec::new())
    }

    /// Adds the gradient of one example's cross-entropy loss (scaled by `scale`) to `grad`; returns the loss.
    fn accumulate(&self, x: &[f64], y: f64, scale: f64, grad: &mut [f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        let z = self.forward(x, acts);
        // softplus(z) - y z, computed stably.
        let loss = z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        let mut delta = vec![(sigmoid(z) - y) * scale];
        let mut offsets = Vec::with_capacity(self.sizes.len() - 1);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        for l in (0..self.sizes.len() - 1).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let weights = &self.params[off..off + n_in * n_out];
                delta = (0..n_in)
                    .map(|i| {
                        if input[i] <= 0.0 {
                            0.0
                        } else {
                            (0..n_out).map(|o| weights[o * n_in + i] * delta[o]).sum()
                        }
                    })
                    .collect();
            }
        }
        loss
    }

    fn l2_term(&self, l2: f64, grad: Option<&mut [f64]>) -> f64 {
        if l2 == 0.0 {
            return 0.0;
        }
        let mut penalty = 0.0;
        let mut offset = 0;
        let mut grad = grad;
        for w in self.sizes.windows(2) {
            let n_w = w[0] * w[1];
            for j in offset..offset + n_w {
                penalty += 0.5 * l2 * self.params[j] * self.params[j];
                if let Some(g) = grad.as_deref_mut() {
                    g[j] += l2 * self.params[j];
                }
            }
            offset += n_w + w[1];
        }
        penalty
    }

    /// Mean cross-entropy plus L2 penalty over the given examples, and its gradient.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[f64], l2: f64) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut acts = Vec::new();
        let scale = 1.0 / xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            loss += scale * self.accumulate(x, y, scale, &mut grad, &mut acts);
        }
        loss += self.l2_term(l2, Some(&mut grad));
        (loss, grad)
    }

    pub fn loss(&self, xs: &[Vec<f64>], ys: &[f64], l2: f64) -> f64 {
        let mut acts = Vec::new();
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let z = self.forward(x, &mut acts);
            total += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        }
        total / xs.len() as f64 + self.l2_term(l2, None)
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    standardizer: Standardizer,
    network: Network,
}

impl Mlp {
    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.network.logit(&self.standardizer.apply(x)))
    }
}

/// Mini-batch Adam on standardized inputs. Returns the model and whether the last epoch's
/// loss changed by less than `tol` relative to the one before.
pub fn fit_mlp(data: &Dataset, params: &MlpParams, seed: u64) -> (Mlp, bool) {
    let standardizer = Standardizer::fit(data);
    let xs: Vec<Vec<f64>> = data.rows().map(|x| standardizer.apply(x)).collect();
    let ys: Vec<f64> = data.labels().iter().map(|&l| f64::from(l)).collect();
    let mut rng = rng_from_seed(seed);
    let mut sizes = vec![data.n_features()];
    sizes.extend(std::iter::repeat_n(params.hidden_units.max(1), params.hidden_layers));
    sizes.push(1);
    let mut network = Network::random(sizes, &mut rng);

    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let p = network.params.len();
    let (mut m, mut v) = (vec![0.0; p], vec![0.0; p]);
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let batch = params.batch_size.max(1);
    let mut acts = Vec::new();
    let mut grad = vec![0.0; p];
    let mut previous = f64::INFINITY;
    let mut converged = false;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                epoch_loss += network.accumulate(&xs[i], ys[i], scale, &mut grad, &mut acts);
            }
            network.l2_term(params.l2, Some(&mut grad));
            t += 1;
            let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
            for j in 0..p {
                m[j] = beta1 * m[j] + (1.0 - beta1) * grad[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * grad[j] * grad[j];
                network.params[j] -= params.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
            }
        }
        epoch_loss /= xs.len().max(1) as f64;
        converged = (previous - epoch_loss).abs() <= params.tol * previous.abs().max(1.0);
        previous = epoch_loss;
    }
    (Mlp { standardizer, network }, converged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        for seed in 0..5 {
            let mut rng = rng_from_seed(seed);
            let sizes = vec![3, 4, 3, 1];
            let mut net = Network::random(sizes, &mut rng);
            // Nonzero biases so ReLU kinks are not hit systematically.
            for p in net.params_mut().iter_mut() {
                *p += rng.gen_range(-0.1..0.1);
            }
            let xs: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let ys: Vec<f64> = (0..6).map(|i| f64::from(i % 2)).collect();
            let (_, grad) = net.loss_and_gradient(&xs, &ys, 1e-3);
            let h = 1e-6;
            for j in 0..grad.len() {
                let original = net.params()[j];
                net.params_mut()[j] = original + h;
                let up = net.loss(&xs, &ys, 1e-3);
                net.params_mut()[j] = original - h;
                let down = net.loss(&xs, &ys, 1e-3);
                net.params_mut()[j] = original;
                let numeric = (up - down) / (2.0 * h);
                assert!(
                    relative_error(grad[j], numeric) < 1e-5 || (grad[j] - numeric).abs() < 1e-9,
                    "param {j}: {} vs {numeric}",
                    grad[j]
                );
            }
        }
    }

    #[test]
    fn learns_a_linear_boundary() {
        let mut rng = rng_from_seed(9);
        let rows: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let labels = rows.iter().map(|r| u8::from(r[0] + r[1] > 0.0)).collect();
        let data = Dataset::from_rows(vec!["a".into(), "b".into()], &rows, labels).unwrap();
        let params = MlpParams {
            hidden_layers: 2,
            hidden_units: 8,
            learning_rate: 0.01,
            epochs: 60,
            batch_size: 32,
            l2: 1e-4,
            tol: 1e-4,
        };
        let (mlp, _) = fit_mlp(&data, &params, 1);
        let hits = data.rows().zip(data.labels()).filter(|(x, &y)| u8::from(mlp.score(x) >= 0.5) == y).count();
        assert!(hits >= 380, "{hits}");
    }
}
