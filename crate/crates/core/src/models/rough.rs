//! Rough k-means clustering used as a classifier.
//!
//! Each object lands either in exactly one lower approximation (it is clearly
//! nearest to one centre) or, when its two nearest centres are within `epsilon`
//! of each other, in the upper approximations of both. Centres are a weighted
//! mix of the lower-approximation mean and the boundary mean. Each cluster then
//! carries the majority label of its lower approximation.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::linear::Standardizer;
use crate::dataset::Dataset;
use crate::rng::rng_from_seed;

#[derive(Debug, Error, PartialEq)]
pub enum RoughError {
    #[error("k = {k} exceeds the {distinct} distinct points")]
    TooFewPoints { k: usize, distinct: usize },
    #[error("invalid rough k-means parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughParams {
    pub k: usize,
    /// Absolute distance-gap threshold; `None` derives it from `epsilon_fraction`.
    pub epsilon: Option<f64>,
    /// Threshold as a share of the mean gap between nearest and second-nearest initial centres.
    pub epsilon_fraction: f64,
    pub w_lower: f64,
    pub w_upper: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RoughParams {
    fn default() -> Self {
        Self { k: 2, epsilon: None, epsilon_fraction: 0.1, w_lower: 0.7, w_upper: 0.3, max_iter: 100, tol: 1e-9 }
    }
}

/// Cluster memberships of one object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    /// In this cluster's lower (and therefore upper) approximation.
    Lower(usize),
    /// In the upper approximations of both clusters, in no lower approximation.
    Boundary(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoughClusterModel {
    standardizer: Standardizer,
    centers: Vec<Vec<f64>>,
    epsilon: f64,
    w_lower: f64,
    w_upper: f64,
    labels: Vec<u8>,
    lower_sizes: Vec<usize>,
    upper_sizes: Vec<usize>,
    iterations: usize,
    converged: bool,
}

impl RoughClusterModel {
    /// Centres in standardized coordinates.
    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cluster_labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn lower_sizes(&self) -> &[usize] {
        &self.lower_sizes
    }

    pub fn upper_sizes(&self) -> &[usize] {
        &self.upper_sizes
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Index of the nearest centre, lower index on ties.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let z = self.standardizer.apply(x);
        nearest_two(&self.centers, &z).0 .0
    }

    pub fn membership(&self, x: &[f64]) -> Membership {
        assign(&self.centers, &self.standardizer.apply(x), self.epsilon)
    }

    /// Label of the nearest cluster.
    pub fn predict(&self, x: &[f64]) -> u8 {
        self.labels[self.nearest(x)]
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `((nearest, d1), (second, d2))`; ties go to the lower index.
fn nearest_two(centers: &[Vec<f64>], z: &[f64]) -> ((usize, f64), (usize, f64)) {
    let mut first = (usize::MAX, f64::INFINITY);
    let mut second = (usize::MAX, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = distance(center, z);
        if d < first.1 {
            second = first;
            first = (c, d);
        } else if d < second.1 {
            second = (c, d);
        }
    }
    (first, second)
}

fn assign(centers: &[Vec<f64>], z: &[f64], epsilon: f64) -> Membership {
    let ((c1, d1), (c2, d2)) = nearest_two(centers, z);
    if c2 != usize::MAX && d2 - d1 < epsilon {
        Membership::Boundary(c1, c2)
    } else {
        Membership::Lower(c1)
    }
}

/// `k` distinct rows chosen by the seed, in standardized coordinates.
pub fn initial_centers(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>, RoughError> {
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    let mut rng = rng_from_seed(seed);
    // Draw without replacement until k pairwise-distinct points are found.
    let order = sample(&mut rng, points.len(), points.len());
    for i in order {
        if !distinct.iter().any(|p| *p == &points[i]) {
            distinct.push(&points[i]);
            if distinct.len() == k {
                break;
            }
        }
    }
    if distinct.len() < k {
        return Err(RoughError::TooFewPoints { k, distinct: distinct.len() });
    }
    Ok(distinct.into_iter().cloned().collect())
}

fn mean_into(points: &[Vec<f64>], members: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for &i in members {
        for (o, v) in out.iter_mut().zip(&points[i]) {
            *o += v;
        }
    }
    let n = members.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
}

/// Rough k-means on standardized features. Returns `RoughError` when `k` exceeds
/// the number of distinct points.
pub fn rough_kmeans_fit(data: &Dataset, params: &RoughParams, seed: u64) -> Result<RoughClusterModel, RoughError> {
    if params.k < 2 {
        return Err(RoughError::InvalidParams(format!("k must be at least 2, got {}", params.k)));
    }
    if !(params.w_lower > 0.0 && params.w_upper > 0.0 && (params.w_lower + params.w_upper - 1.0).abs() < 1e-9) {
        return Err(RoughError::InvalidParams("weights must be positive and sum to 1".into()));
    }
    let standardizer = Standardizer::fit(data);
    let points: Vec<Vec<f64>> = data.rows().map(|x| standardizer.apply(x)).collect();
    let mut centers = initial_centers(&points, params.k, seed)?;
    let epsilon = match params.epsilon {
        Some(e) => e,
        None => {
            let gaps: f64 = points
                .iter()
                .map(|z| {
                    let ((_, d1), (_, d2)) = nearest_two(&centers, z);
                    d2 - d1
                })
                .sum();
            params.epsilon_fraction * gaps / points.len().max(1) as f64
        }
    };

    let d = data.n_features();
    let mut memberships = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut lower_mean = vec![0.0; d];
    let mut boundary_mean = vec![0.0; d];
    while iterations < params.max_iter {
        iterations += 1;
        memberships = points.iter().map(|z| assign(&centers, z, epsilon)).collect::<Vec<_>>();
        let mut lower: Vec<Vec<usize>> = vec![Vec::new(); params.k];
        let mut boundary: Vec<Vec<usize>> = vec![Vec::new(); params.k];
        for (i, m) in memberships.iter().enumerate() {
            match *m {
                Membership::Lower(c) => lower[c].push(i),
                Membership::Boundary(a, b) => {
                    boundary[a].push(i);
                    boundary[b].push(i);
                }
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..params.k {
            let new: Vec<f64> = match (lower[c].is_empty(), boundary[c].is_empty()) {
                (true, true) => continue,
                (false, true) => {
                    mean_into(&points, &lower[c], &mut lower_mean);
                    lower_mean.clone()
                }
                (true, false) => {
                    mean_into(&points, &boundary[c], &mut boundary_mean);
                    boundary_mean.clone()
                }
                (false, false) => {
                    mean_into(&points, &lower[c], &mut lower_mean);
                    mean_into(&points, &boundary[c], &mut boundary_mean);
                    lower_mean.iter().zip(&boundary_mean).map(|(l, b)| params.w_lower * l + params.w_upper * b).collect()
                }
            };
            shift = shift.max(distance(&centers[c], &new));
            centers[c] = new;
        }
        if shift < params.tol {
            converged = true;
            break;
        }
    }

    let mut lower_votes = vec![[0usize; 2]; params.k];
    let mut upper_votes = vec![[0usize; 2]; params.k];
    for (m, &y) in memberships.iter().zip(data.labels()) {
        match *m {
            Membership::Lower(c) => {
                lower_votes[c][y as usize] += 1;
                upper_votes[c][y as usize] += 1;
            }
            Membership::Boundary(a, b) => {
                upper_votes[a][y as usize] += 1;
                upper_votes[b][y as usize] += 1;
            }
        }
    }
    let labels = (0..params.k)
        .map(|c| {
            let votes = if lower_votes[c][0] + lower_votes[c][1] > 0 { lower_votes[c] } else { upper_votes[c] };
            u8::from(votes[1] > votes[0])
        })
        .collect();
    Ok(RoughClusterModel {
        standardizer,
        centers,
        epsilon,
        w_lower: params.w_lower,
        w_upper: params.w_upper,
        labels,
        lower_sizes: lower_votes.iter().map(|v| v[0] + v[1]).collect(),
        upper_sizes: upper_votes.iter().map(|v| v[0] + v[1]).collect(),
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..100 {
            let c = if i % 2 == 0 { 10.0 } else { -10.0 };
            rows.push(vec![c + rng.gen_range(-0.5..0.5), c + rng.gen_range(-0.5..0.5)]);
            labels.push(u8::from(i % 2 == 0));
        }
        Dataset::from_rows(vec!["a".into(), "b".into()], &rows, labels).unwrap()
    }

    #[test]
    fn separated_blobs_are_all_lower_members_and_perfectly_predicted() {
        let data = blobs(1);
        let model = rough_kmeans_fit(&data, &RoughParams::default(), 3).unwrap();
        assert_eq!(model.lower_sizes().iter().sum::<usize>(), 100);
        for (x, &y) in data.rows().zip(data.labels()) {
            assert!(matches!(model.membership(x), Membership::Lower(_)));
            assert_eq!(model.predict(x), y);
        }
    }

    #[test]
    fn equidistant_point_goes_to_both_upper_approximations() {
        let centers = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(assign(&centers, &[0.0, 5.0], 0.1), Membership::Boundary(0, 1));
        assert_eq!(assign(&centers, &[-0.9, 0.0], 0.1), Membership::Lower(0));
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let rows = vec![vec![1.0], vec![1.0], vec![2.0]];
        let data = Dataset::from_rows(vec!["a".into()], &rows, vec![0, 1, 0]).unwrap();
        let params = RoughParams { k: 3, ..Default::default() };
        assert_eq!(rough_kmeans_fit(&data, &params, 0).unwrap_err(), RoughError::TooFewPoints { k: 3, distinct: 2 });
    }

    #[test]
    fn empty_lower_approximation_falls_back_to_upper_votes() {
        // Two centres far from every point along the x-axis midline: all points are boundary objects.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![0.0, i as f64]).collect();
        let labels = (0..10).map(|i| u8::from(i < 7)).collect();
        let data = Dataset::from_rows(vec!["a".into(), "b".into()], &rows, labels).unwrap();
        let params = RoughParams { k: 2, epsilon: Some(1e9), max_iter: 1, ..Default::default() };
        let model = rough_kmeans_fit(&data, &params, 0).unwrap();
        assert_eq!(model.lower_sizes(), &[0, 0]);
        assert_eq!(model.cluster_labels(), &[1, 1]);
    }
}
