use std::fmt;
use std::path::PathBuf;

use ndpc_core::ndp::NdpError;
use ndpc_core::outcome::OutcomeError;
use ndpc_core::summary::SummaryError;
use ndpc_core::synth::SynthError;
use thiserror::Error;

/// One problem found while validating an input file. `row` is the 1-based
/// data row (the header is row 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub row: usize,
    pub column: String,
    pub reason: String,
}

/// Every problem found in one file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub path: PathBuf,
    pub issues: Vec<Issue>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} problem(s)", self.path.display(), self.issues.len())?;
        for i in &self.issues {
            write!(f, "\n  row {}, column {}: {}", i.row, i.column, i.reason)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Validation(ValidationReport),
    #[error("{path}: missing column {column}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { path: PathBuf, found: u64, expected: u64 },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error("convergence gate failed: {0}")]
    Gate(String),
    #[error(transparent)]
    Ndp(#[from] NdpError),
    #[error(transparent)]
    Outcome(#[from] OutcomeError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for a failed convergence gate,
    /// 4 for a broken internal invariant, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::MissingColumn { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Malformed { .. }
            | Error::Usage(_)
            | Error::Summary(_)
            | Error::Synth(_) => 2,
            Error::Gate(_) => 3,
            Error::Ndp(e) => match e {
                NdpError::Invariant(_) | NdpError::StickOutOfRange { .. } | NdpError::NumericalUnderflow { .. } => 4,
                _ => 2,
            },
            Error::Outcome(e) => match e {
                OutcomeError::NotConverged { .. } => 3,
                OutcomeError::NoDraws | OutcomeError::Diagnostics(_) => 4,
                _ => 2,
            },
            Error::Io { .. } | Error::Csv { .. } | Error::Json { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}

pub(crate) fn csv_err(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Error {
    let path = path.into();
    move |source| Error::Csv { path, source }
}

pub(crate) fn json_err(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> Error {
    let path = path.into();
    move |source| Error::Json { path, source }
}
