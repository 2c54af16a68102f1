use std::io;
use std::path::PathBuf;

use thiserror::Error;
use uorrl_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 validation, 3 numerical failure, 4 capacity,
    /// 1 for I/O and anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::NumericalFailure { .. }) => 3,
            CliError::Core(CoreError::Capacity(_)) => 4,
            CliError::Core(_) | CliError::Config(_) | CliError::Json { .. } => 2,
            CliError::Io { .. } | CliError::Csv { .. } => 1,
        }
    }
}
