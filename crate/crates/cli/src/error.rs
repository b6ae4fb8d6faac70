use std::io;
use std::path::PathBuf;

use dgor_core::DgorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] DgorError),
    #[error("{0}")]
    Usage(String),
    #[error("non-responder {0} has no stage-2 outcome (y2)")]
    MissingY2ForNonResponder(String),
    #[error("patient {patient_id}: {field} = {value:?} is not a category in 1..=5")]
    BadCategory {
        patient_id: String,
        field: &'static str,
        value: String,
    },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Dotted machine-readable code; library errors keep their own codes.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Usage(_) => "cli.usage",
            CliError::MissingY2ForNonResponder(_) => "ingest.missing_y2_for_nonresponder",
            CliError::BadCategory { .. } => "ingest.bad_category",
            CliError::Io { .. } => "io.error",
            CliError::BindFailure { .. } => "service.bind_failure",
            CliError::Json(e) if e.is_syntax() || e.is_eof() => "request.malformed_json",
            CliError::Json(_) => "request.invalid_body",
            CliError::Csv(_) => "data.malformed",
        }
    }

    /// Process exit status: 1 for environment failures, 2 for bad input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::BindFailure { .. } => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
