use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the CLI and the service.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    ReadFile { path: PathBuf, source: std::io::Error },
    #[error("row {row}, column `{column}`: {message}")]
    Cell { row: usize, column: String, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Config(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("{0}")]
    NotFound(String),
    #[error("training already in progress for model `{0}`")]
    InProgress(String),
    #[error(transparent)]
    Model(#[from] ppforest_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 data error, 3 configuration error, 4 internal.
    pub fn exit_code(&self) -> i32 {
        use ppforest_core::Error as Core;
        match self {
            Error::ReadFile { .. } | Error::Cell { .. } | Error::Data(_) | Error::Csv(_) => 2,
            Error::Model(
                Core::InvalidData(_) | Core::ConstantColumn { .. } | Core::DegenerateData(_) | Core::FingerprintMismatch { .. },
            ) => 2,
            Error::Config(_) | Error::UnknownModel(_) | Error::NotFound(_) | Error::InProgress(_) => 3,
            Error::Model(Core::InvalidConfig(_) | Core::UnknownClass(_) | Core::UnknownTree(_) | Core::UnknownNode(_)) => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
