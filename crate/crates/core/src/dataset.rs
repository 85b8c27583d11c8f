//! Dense, column-typed feature matrix shared by every stage after encoding.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Group id carried by rows that do not belong to a real customer (SMOTE output).
pub const SYNTHETIC_GROUP: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    /// Ordinal codes `0..levels`, code 0 being the "Not Available" level.
    Categorical { levels: u32 },
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("expected {expected} values for {rows} rows x {cols} columns, got {actual}")]
    Shape { rows: usize, cols: usize, expected: usize, actual: usize },
    #[error("{what} has length {actual}, expected {expected}")]
    Length { what: &'static str, expected: usize, actual: usize },
    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },
    #[error("label {label} at row {row} is not binary")]
    Label { row: usize, label: u8 },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    feature_names: Vec<String>,
    kinds: Vec<ColumnKind>,
    /// Row-major values.
    values: Vec<f64>,
    labels: Vec<u8>,
    /// Customer id of every row; rows of one customer never straddle a split.
    groups: Vec<u32>,
    vintage: Option<u16>,
    holdout: bool,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        kinds: Vec<ColumnKind>,
        values: Vec<f64>,
        labels: Vec<u8>,
        groups: Vec<u32>,
    ) -> Result<Self, DatasetError> {
        let cols = feature_names.len();
        if kinds.len() != cols {
            return Err(DatasetError::Length { what: "kinds", expected: cols, actual: kinds.len() });
        }
        let rows = labels.len();
        if values.len() != rows * cols {
            return Err(DatasetError::Shape { rows, cols, expected: rows * cols, actual: values.len() });
        }
        if groups.len() != rows {
            return Err(DatasetError::Length { what: "groups", expected: rows, actual: groups.len() });
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 1) {
            return Err(DatasetError::Label { row, label });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite { row: pos / cols.max(1), column: feature_names[pos % cols].clone() });
        }
        Ok(Self { feature_names, kinds, values, labels, groups, vintage: None, holdout: false })
    }

    /// Convenience constructor for all-numeric data where every row is its own group.
    pub fn from_rows(feature_names: Vec<String>, rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self, DatasetError> {
        let cols = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(DatasetError::Length { what: "row", expected: cols, actual: row.len() });
            }
            values.extend_from_slice(row);
        }
        let groups = (0..rows.len() as u32).collect();
        Self::new(feature_names, vec![ColumnKind::Numeric; cols], values, labels, groups)
    }

    /// Replaces the column kinds, e.g. to mark ordinal-coded columns as categorical.
    pub fn with_kinds(mut self, kinds: Vec<ColumnKind>) -> Result<Self, DatasetError> {
        if kinds.len() != self.n_features() {
            return Err(DatasetError::Length { what: "kinds", expected: self.n_features(), actual: kinds.len() });
        }
        self.kinds = kinds;
        Ok(self)
    }

    pub fn with_vintage(mut self, year: u16) -> Self {
        self.vintage = Some(year);
        self
    }

    /// Flag this dataset as a holdout set. Holdout data is refused by the resampler.
    pub fn into_holdout(mut self) -> Self {
        self.holdout = true;
        self
    }

    pub fn is_holdout(&self) -> bool {
        self.holdout
    }

    pub fn vintage(&self) -> Option<u16> {
        self.vintage
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_features() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.value(r, col)).collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn groups(&self) -> &[u32] {
        &self.groups
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.n_rows()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset_rows(&self, indices: &[usize]) -> Dataset {
        let d = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        let mut groups = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            groups.push(self.groups[i]);
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            kinds: self.kinds.clone(),
            values,
            labels,
            groups,
            vintage: self.vintage,
            holdout: self.holdout,
        }
    }

    /// New dataset restricted to the given columns.
    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(self.n_rows() * columns.len());
        for row in self.rows() {
            values.extend(columns.iter().map(|&c| row[c]));
        }
        Dataset {
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
            kinds: columns.iter().map(|&c| self.kinds[c]).collect(),
            values,
            labels: self.labels.clone(),
            groups: self.groups.clone(),
            vintage: self.vintage,
            holdout: self.holdout,
        }
    }

    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset, DatasetError> {
        let columns = names
            .iter()
            .map(|n| self.feature_index(n.as_ref()).ok_or_else(|| DatasetError::UnknownFeature(n.as_ref().to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.select_columns(&columns))
    }

    /// Appends rows; used by the resampler. Values must match the column count.
    pub(crate) fn push_row(&mut self, row: &[f64], label: u8, group: u32) {
        debug_assert_eq!(row.len(), self.n_features());
        self.values.extend_from_slice(row);
        self.labels.push(label);
        self.groups.push(group);
    }

    /// SHA-256 over names, values, labels and groups; identifies a row set exactly.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for name in &self.feature_names {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        for v in &self.values {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update(&self.labels);
        for g in &self.groups {
            hasher.update(g.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Columnar CSV snapshot: one header row of feature names plus `group` and `defaulted`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("group");
        header.push("defaulted");
        out.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(self.groups[i].to_string());
            record.push(self.labels[i].to_string());
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }
}
