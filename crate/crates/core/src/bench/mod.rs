//! Experiment runner: configuration, synthetic vintages, orchestration and reports.

pub mod config;
pub mod report;
pub mod runner;
pub mod synthetic;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub use config::{ExperimentConfig, ModelEntry, Preset, ResampleSettings, DATA_DIR_ENV};
pub use report::{read_metrics_csv, write_reports};
pub use runner::{format_stats, inspect, run, Artifact, RunSummary, VintageStats};
pub use synthetic::{generate_synthetic, synthesize, GeneratedVintage, SyntheticSpec};

/// Pipeline stage, used to tag failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Sample,
    Encode,
    Select,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Load => "load",
            Stage::Sample => "sample",
            Stage::Encode => "encode",
            Stage::Select => "select",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("[{stage}] vintage {year}: {message}")]
    Data { stage: Stage, year: u16, message: String },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("[report] {0}")]
    Report(String),
}

impl BenchError {
    /// Process exit status: 1 for configuration problems, 2 for data and I/O failures.
    /// A run that finishes with failed cells exits 3 (see [`RunSummary::is_partial`]).
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 1,
            BenchError::Data { .. } | BenchError::Output { .. } | BenchError::Report(_) => 2,
        }
    }
}

pub const EXIT_PARTIAL: i32 = 3;
