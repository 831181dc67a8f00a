//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by data loading, model training, attacks and reporting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Cell-level CSV problem, naming the offending row and column.
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    /// Dataset-shape or content violation (too small, empty, single-class, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Invalid parameter or configuration value.
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("sample already classified as target")]
    AlreadyTarget,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Raised by the serialization gate when a successful adversarial example
    /// escapes its feature bounds.
    #[error("bounds violation: sample {index}, feature {feature}")]
    BoundsViolation { index: usize, feature: usize },

    #[error("no feature correlates with target")]
    NoCorrelation,

    /// Wraps an error with the pipeline stage it occurred in.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tag `self` with the pipeline stage it surfaced from.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Extension for attaching stage context to any fallible pipeline step.
pub trait StageContext<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
