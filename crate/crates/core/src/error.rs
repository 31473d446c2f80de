use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TomoError>;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric guard tripped: {0}")]
    Numeric(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("missing input: {0}")]
    Missing(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl TomoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TomoError::Io { path: path.into(), source }
    }

    /// True for errors that the CLI reports with the configuration exit code.
    pub fn is_config(&self) -> bool {
        matches!(self, TomoError::Config(_) | TomoError::Json(_))
    }
}
