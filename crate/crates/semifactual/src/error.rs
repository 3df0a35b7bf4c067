use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column {column:?}: {message}")]
    Parse { path: PathBuf, row: usize, column: String, message: String },

    #[error("{path}: feature {column:?} has no values")]
    UnusableFeature { path: PathBuf, column: String },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] semifactual_core::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 2 when the input to explain was not rejected, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(semifactual_core::Error::NotRejected) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
