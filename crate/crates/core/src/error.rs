use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("constant series cannot be partitioned")]
    ConstantSeries,

    #[error("insufficient distinct values: need {required}, found {found}")]
    InsufficientDistinct { required: usize, found: usize },

    #[error("repeated values collapse quantile boundaries: {bins} bins requested, only {distinct} separable")]
    CollapsedBoundaries { bins: usize, distinct: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("{}: row {row}, column '{column}': {message}", path.display())]
    Csv {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    CsvFormat(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
