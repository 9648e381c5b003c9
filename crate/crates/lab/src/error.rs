use std::path::PathBuf;

use thiserror::Error;

/// Failure of a lab command. Check failures are not errors; they are reported
/// through the run outcome.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown experiment id `{0}` (see `list`)")]
    UnknownExperiment(String),

    #[error("solver error: {0}")]
    Solver(#[from] robust_duality::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Config(_) | LabError::Io { .. } | LabError::UnknownExperiment(_) => EXIT_CONFIG,
            LabError::Solver(_) | LabError::Internal(_) => EXIT_SOLVER,
        }
    }
}

/// Errors raised while loading inputs are configuration errors.
pub(crate) fn at_load(e: robust_duality::Error) -> LabError {
    match e {
        robust_duality::Error::Io(source) => LabError::Config(format!("cannot read input: {source}")),
        other => LabError::Config(other.to_string()),
    }
}
