//! Turns labelled loan records into a dense [`Dataset`].
//!
//! Nominal fields become ordinal codes from a vocabulary frozen at fit time.
//! Code 0 is always "Not Available"; values never seen at fit time map to it.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::record::{LoanRecord, Value};
use super::schema::{lookup, FieldKind, FieldRef, NOT_AVAILABLE};
use super::DataError;
use crate::dataset::{ColumnKind, Dataset};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    levels: Vec<String>,
}

impl Vocabulary {
    fn build<'a>(values: impl Iterator<Item = &'a str>) -> Self {
        let distinct: BTreeSet<&str> = values.filter(|v| *v != NOT_AVAILABLE).collect();
        let mut sorted: Vec<&str> = distinct.into_iter().collect();
        sorted.sort_by(|a, b| natural_cmp(a, b));
        let mut levels = vec![NOT_AVAILABLE.to_string()];
        levels.extend(sorted.into_iter().map(str::to_string));
        Self { levels }
    }

    pub fn code(&self, value: &str) -> u32 {
        // Levels after index 0 are sorted; fall back to a scan when the sort key is not total.
        self.levels.iter().position(|l| l == value).map_or(0, |i| i as u32)
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Numeric-looking strings first, in numeric order; everything else lexicographic.
fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EncodedFeature {
    name: String,
    #[serde(skip)]
    source: Option<FieldRef>,
    vocabulary: Option<Vocabulary>,
}

/// Frozen feature encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    features: Vec<EncodedFeature>,
}

impl Encoder {
    /// Resolves the requested features and builds vocabularies from `records`.
    pub fn fit<S: AsRef<str>>(records: &[LoanRecord], feature_names: &[S]) -> Result<Self, DataError> {
        let mut features = Vec::with_capacity(feature_names.len());
        for name in feature_names {
            let name = name.as_ref();
            let field = lookup(name).ok_or_else(|| DataError::UnknownFeature(name.to_string()))?;
            let vocabulary = match field.def().kind {
                FieldKind::Numeric => None,
                FieldKind::Nominal => Some(Vocabulary::build(records.iter().filter_map(|r| r.field(field).as_text()))),
                FieldKind::Date => {
                    return Err(DataError::ExcludedFeature {
                        name: name.to_string(),
                        reason: "date fields are not model features".to_string(),
                    })
                }
                FieldKind::ZeroBalance => {
                    return Err(DataError::ExcludedFeature {
                        name: name.to_string(),
                        reason: "zeroBalanceCode is the source of the target label".to_string(),
                    })
                }
                FieldKind::Key | FieldKind::Identifier => {
                    return Err(DataError::ExcludedFeature {
                        name: name.to_string(),
                        reason: "identifiers are not model features".to_string(),
                    })
                }
            };
            features.push(EncodedFeature { name: name.to_string(), source: Some(field), vocabulary });
        }
        Ok(Self { features })
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn vocabulary(&self, feature: &str) -> Option<&Vocabulary> {
        self.features.iter().find(|f| f.name == feature).and_then(|f| f.vocabulary.as_ref())
    }

    pub fn transform(&self, records: &[LoanRecord]) -> Result<Dataset, DataError> {
        let d = self.features.len();
        let mut values = Vec::with_capacity(records.len() * d);
        for (row, record) in records.iter().enumerate() {
            for feature in &self.features {
                let field = feature.source.or_else(|| lookup(&feature.name)).expect("resolved at fit");
                let cell = record.field(field);
                let v = match (&feature.vocabulary, cell) {
                    (_, Value::Missing) => {
                        return Err(DataError::MissingCell { row, feature: feature.name.clone() })
                    }
                    (Some(vocab), Value::Text(s)) => f64::from(vocab.code(s)),
                    (Some(vocab), Value::Num(x)) => f64::from(vocab.code(&x.to_string())),
                    (None, Value::Num(x)) => *x,
                    (None, Value::Text(s)) => {
                        return Err(DataError::MissingCell { row, feature: format!("{} (text `{s}` in numeric field)", feature.name) })
                    }
                };
                values.push(v);
            }
        }
        let kinds = self
            .features
            .iter()
            .map(|f| match &f.vocabulary {
                Some(v) => ColumnKind::Categorical { levels: v.len() as u32 },
                None => ColumnKind::Numeric,
            })
            .collect();
        let labels = records.iter().map(|r| u8::from(r.defaulted)).collect();
        let groups = records.iter().map(|r| r.customer).collect();
        let mut dataset = Dataset::new(self.feature_names(), kinds, values, labels, groups)?;
        if let Some(first) = records.first() {
            if records.iter().all(|r| r.vintage_year == first.vintage_year) {
                dataset = dataset.with_vintage(first.vintage_year);
            }
        }
        Ok(dataset)
    }
}

/// Fits an encoder on `records` and encodes them.
pub fn encode<S: AsRef<str>>(records: &[LoanRecord], feature_names: &[S]) -> Result<(Dataset, Encoder), DataError> {
    let encoder = Encoder::fit(records, feature_names)?;
    let dataset = encoder.transform(records)?;
    Ok((dataset, encoder))
}
