use thiserror::Error;

/// Errors surfaced while building, fitting, evaluating or persisting a survival kernet.
#[derive(Debug, Error)]
pub enum KernetError {
    #[error("cannot build a time grid: no uncensored records")]
    EmptyGrid,
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("dimension mismatch (expected {expected}, got {actual})")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("parse error at row {row}, column `{column}`: {reason}")]
    Parse {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("model file error: {0}")]
    ModelFormat(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model checksum mismatch")]
    ChecksumMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl KernetError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        KernetError::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the caller's arguments rather than by the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, KernetError::InvalidArgument { .. })
    }
}

pub type Result<T, E = KernetError> = std::result::Result<T, E>;
