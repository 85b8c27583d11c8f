//! SMOTE oversampling of the minority class.
//!
//! Synthetic rows are drawn on segments between a minority row and one of its
//! nearest minority neighbours. Neighbours are found on a z-scored copy of the
//! data; interpolation happens on the original values.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ColumnKind, Dataset, SYNTHETIC_GROUP};
use crate::rng::{rng_from_seed, StageRng};

#[derive(Debug, Error, PartialEq)]
pub enum ResampleError {
    #[error("refusing to resample a holdout set")]
    Holdout,
    #[error("SMOTE needs at least 2 minority rows, found {0}")]
    TooFewMinority(usize),
    #[error("invalid resampling config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResampleConfig {
    /// Neighbours considered per minority row.
    pub k: usize,
    /// Desired minority/majority ratio after oversampling.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self { k: 5, target_ratio: 1.0, seed: 0 }
    }
}

impl ResampleConfig {
    pub fn validate(&self) -> Result<(), ResampleError> {
        if self.k == 0 {
            return Err(ResampleError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(ResampleError::InvalidConfig(format!("target_ratio {} is not in (0, 1]", self.target_ratio)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub row: usize,
    pub distance: f64,
}

/// Exact k nearest neighbours of every indexed point among the other indexed points.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    rows: Vec<usize>,
    lists: Vec<Vec<Neighbor>>,
}

impl NeighborIndex {
    /// Index over raw points under plain Euclidean distance; rows are positions in `points`.
    pub fn build(points: &[Vec<f64>], k: usize) -> Result<Self, ResampleError> {
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        Self::from_points((0..points.len()).collect(), &refs, k)
    }

    fn from_points(rows: Vec<usize>, points: &[&[f64]], k: usize) -> Result<Self, ResampleError> {
        if points.len() < 2 {
            return Err(ResampleError::TooFewMinority(points.len()));
        }
        if k == 0 {
            return Err(ResampleError::InvalidConfig("k must be at least 1".into()));
        }
        let k = k.min(points.len() - 1);
        let lists = (0..points.len())
            .into_par_iter()
            .map(|i| {
                let mut all: Vec<(f64, usize)> = (0..points.len())
                    .filter(|&j| j != i)
                    .map(|j| (squared_distance(points[i], points[j]), j))
                    .collect();
                all.sort_by(|a, b| a.0.total_cmp(&b.0).then(rows[a.1].cmp(&rows[b.1])));
                all.truncate(k);
                all.into_iter().map(|(d2, j)| Neighbor { row: rows[j], distance: d2.sqrt() }).collect()
            })
            .collect();
        Ok(Self { rows, lists })
    }

    /// Rows that were indexed, in index order.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Neighbours of the `i`-th indexed row, nearest first.
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.lists[i]
    }

    /// Neighbours of a dataset row, if it was indexed.
    pub fn neighbors_of_row(&self, row: usize) -> Option<&[Neighbor]> {
        self.rows.iter().position(|&r| r == row).map(|i| self.neighbors(i))
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Label of the less frequent class (1 on ties).
pub fn minority_label(data: &Dataset) -> u8 {
    let positives = data.positives();
    u8::from(positives * 2 <= data.n_rows())
}

/// Per-column mean and standard deviation over all rows; zero spread maps to 1.
fn column_scaling(data: &Dataset) -> Vec<(f64, f64)> {
    let n = data.n_rows().max(1) as f64;
    (0..data.n_features())
        .map(|c| {
            let col = data.column(c);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            (mean, if sd > 0.0 { sd } else { 1.0 })
        })
        .collect()
}

/// Exact k-NN among the minority rows, on z-scored columns.
///
/// Every column is scaled by its mean and spread over the whole dataset, so
/// that no single wide-ranged field dominates the distance.
pub fn knn_minority(data: &Dataset, k: usize) -> Result<NeighborIndex, ResampleError> {
    let minority = minority_label(data);
    let rows: Vec<usize> = (0..data.n_rows()).filter(|&i| data.labels()[i] == minority).collect();
    let scaling = column_scaling(data);
    let scaled: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| data.row(i).iter().zip(&scaling).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();
    let refs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
    NeighborIndex::from_points(rows, &refs, k)
}

/// How the interpolation gap `u` is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapDraw {
    /// Uniform on [0, 1).
    Uniform,
    /// Always this value.
    Fixed(f64),
}

/// Where a synthetic row came from: `source + gap * (neighbor - source)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Provenance {
    pub source_row: usize,
    pub neighbor_row: usize,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SmoteOutput {
    /// Input rows followed by the synthetic rows.
    pub data: Dataset,
    /// One entry per synthetic row, in the order they were appended.
    pub provenance: Vec<Provenance>,
    pub original_rows: usize,
}

impl SmoteOutput {
    pub fn synthetic_count(&self) -> usize {
        self.provenance.len()
    }

    /// Writes the synthetic rows with their provenance as CSV.
    pub fn write_provenance_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self.data.feature_names().to_vec();
        header.extend(["defaulted", "source_row", "neighbor_row", "gap"].map(String::from));
        out.write_record(&header)?;
        for (j, p) in self.provenance.iter().enumerate() {
            let row = self.original_rows + j;
            let mut record: Vec<String> = self.data.row(row).iter().map(|v| v.to_string()).collect();
            record.push(self.data.labels()[row].to_string());
            record.push(p.source_row.to_string());
            record.push(p.neighbor_row.to_string());
            record.push(p.gap.to_string());
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Number of synthetic rows needed so that minority / majority reaches `target_ratio`.
pub fn synthetic_needed(minority: usize, majority: usize, target_ratio: f64) -> usize {
    let target = (target_ratio * majority as f64).round() as usize;
    target.saturating_sub(minority)
}

/// Oversamples the minority class up to the configured ratio.
pub fn smote(data: &Dataset, cfg: &ResampleConfig) -> Result<Dataset, ResampleError> {
    smote_detailed(data, cfg, GapDraw::Uniform).map(|out| out.data)
}

/// SMOTE that also returns the generation provenance of each synthetic row.
pub fn smote_detailed(data: &Dataset, cfg: &ResampleConfig, gap: GapDraw) -> Result<SmoteOutput, ResampleError> {
    if data.is_holdout() {
        return Err(ResampleError::Holdout);
    }
    cfg.validate()?;
    let minority = minority_label(data);
    let minority_count = data.labels().iter().filter(|&&l| l == minority).count();
    let majority_count = data.n_rows() - minority_count;
    let needed = synthetic_needed(minority_count, majority_count, cfg.target_ratio);
    let mut out = data.clone();
    if needed == 0 {
        return Ok(SmoteOutput { data: out, provenance: Vec::new(), original_rows: data.n_rows() });
    }
    let index = knn_minority(data, cfg.k)?;
    let mut rng: StageRng = rng_from_seed(cfg.seed);
    let mut provenance = Vec::with_capacity(needed);
    let mut synthetic = vec![0.0; data.n_features()];
    for j in 0..needed {
        let i = j % index.rows().len();
        let source = index.rows()[i];
        let neighbors = index.neighbors(i);
        let neighbor = neighbors[rng.gen_range(0..neighbors.len())].row;
        let u = match gap {
            GapDraw::Uniform => rng.gen::<f64>(),
            GapDraw::Fixed(u) => u,
        };
        let (x, nb) = (data.row(source), data.row(neighbor));
        for (c, kind) in data.kinds().iter().enumerate() {
            let v = x[c] + u * (nb[c] - x[c]);
            synthetic[c] = match kind {
                ColumnKind::Numeric => v,
                ColumnKind::Categorical { levels } => v.round().clamp(0.0, f64::from(levels.saturating_sub(1))),
            };
        }
        out.push_row(&synthetic, minority, SYNTHETIC_GROUP);
        provenance.push(Provenance { source_row: source, neighbor_row: neighbor, gap: u });
    }
    Ok(SmoteOutput { data: out, provenance, original_rows: data.n_rows() })
}
