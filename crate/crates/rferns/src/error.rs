use thiserror::Error;

/// Errors produced by dataset handling, training and the selection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("label column '{0}' not found in input")]
    LabelColumnNotFound(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unsupported model file: {0}")]
    ModelFormat(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input (flags, missing columns,
    /// malformed configuration) rather than runtime failures. The CLI maps
    /// these to exit code 2.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::LabelColumnNotFound(_) | Error::SchemaMismatch(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
