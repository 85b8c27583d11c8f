//! Freddie Mac single-family loan files: parsing, cleaning, labelling,
//! sampling and encoding.

pub mod clean;
pub mod encode;
pub mod label;
pub mod parse;
pub mod record;
pub mod regime;
pub mod sample;
pub mod schema;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use clean::{clean, CleanReport};
pub use encode::{encode, Encoder, Vocabulary};
pub use label::{join_and_label, JoinReport};
pub use parse::{parse_vintage, parse_vintage_with, FileKind, MalformedLine, ParseOptions, ParsedVintage};
pub use record::{LoanRecord, OriginationRecord, PerformanceRecord, Value, ZeroBalanceCode};
pub use regime::{assign_regime, Regime, FIRST_VINTAGE, LAST_VINTAGE};
pub use sample::{customer_status, stratified_sample};
pub use schema::{candidate_features, lookup, FieldKind, FieldRef, ORIGINATION_FIELDS, PERFORMANCE_FIELDS};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {reason}")]
    Malformed { file: String, line: usize, reason: String },
    #[error("vintage {0} is outside 1999-2017")]
    VintageOutOfRange(u16),
    #[error("requested {requested} customers but only {available} are available")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{name}` cannot be used: {reason}")]
    ExcludedFeature { name: String, reason: String },
    #[error("row {row}: no usable value for `{feature}`")]
    MissingCell { row: usize, feature: String },
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

/// Paths of one vintage's files under a data directory.
pub fn vintage_paths(data_dir: &Path, year: u16) -> (PathBuf, PathBuf) {
    let dir = data_dir.join(format!("sample_{year}"));
    (dir.join(format!("sample_orig_{year}.txt")), dir.join(format!("sample_svcg_{year}.txt")))
}

/// Everything produced by loading one vintage from disk.
#[derive(Debug, Clone)]
pub struct LoadedVintage {
    pub year: u16,
    pub regime: Regime,
    pub records: Vec<LoanRecord>,
    pub malformed: Vec<MalformedLine>,
    pub clean: CleanReport,
    pub join: JoinReport,
}

/// Parses, cleans, joins and labels one vintage.
pub fn load_vintage(data_dir: &Path, year: u16, options: ParseOptions) -> Result<LoadedVintage, DataError> {
    let regime = assign_regime(year)?;
    let (orig_path, perf_path) = vintage_paths(data_dir, year);
    let open = |p: &Path| {
        std::fs::File::open(p).map_err(|source| DataError::Io { file: p.display().to_string(), source })
    };
    let parsed = parse_vintage_with(open(&orig_path)?, open(&perf_path)?, options).map_err(|e| match e {
        DataError::Malformed { file, line, reason } => {
            let path = if file == FileKind::Origination.to_string() { &orig_path } else { &perf_path };
            DataError::Malformed { file: path.display().to_string(), line, reason }
        }
        DataError::Io { file, source } => {
            let path = if file == FileKind::Origination.to_string() { &orig_path } else { &perf_path };
            DataError::Io { file: path.display().to_string(), source }
        }
        other => other,
    })?;
    let (origination, performance, clean_report) = clean(parsed.origination, parsed.performance);
    let (records, join) = join_and_label(origination, performance, year)?;
    Ok(LoadedVintage { year, regime, records, malformed: parsed.malformed, clean: clean_report, join })
}
