//! Seeded Monte Carlo runner: batches, sweeps, statistics and reports.

mod batch;
mod report;
mod stats;
mod sweep;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use batch::{
    aggregate, run_batch, run_batch_with, run_trial, trial_rng, BatchOptions, BatchResult, OutputPaths, RunConfig,
    GATE_Z, MIN_GATE_TRIALS,
};
pub use report::{csv_rows, write_csv, write_json, write_report, write_transcripts, CsvRow, CsvSource, ReportFormat, RunReport};
pub use stats::{Gate, MetricSummary, RunStats, Tally, ViolationCounts};
pub use sweep::{run_sweep, GridPoint, PointStatus, SweepGrid, SweepReport, SweepRow};

use crate::lincode::CodeError;
use crate::protocol::ProtocolError;
use crate::qstate::QStateError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("trial {trial} failed: {source}")]
    Protocol {
        trial: usize,
        #[source]
        source: ProtocolError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    QState(#[from] QStateError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}
