use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: u64,
        field: String,
        message: String,
    },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("duplicate token id {0}")]
    DuplicateToken(u64),

    #[error("token {token_id}: duplicate trait category `{category}`")]
    DuplicateCategory { token_id: u64, category: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("token {token_id}: trait `{category}` = `{value}` not present in collection statistics")]
    UnknownTrait {
        token_id: u64,
        category: String,
        value: String,
    },

    #[error("trait category `{0}` not present in collection statistics")]
    UnknownCategory(String),

    #[error("unknown token {0}")]
    UnknownToken(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("all {} tuning trials failed: {}", .0.len(), .0.join("; "))]
    AllTrialsFailed(Vec<String>),

    #[error("dataset {0} is empty after availability filtering")]
    EmptyDataset(String),

    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),

    #[error("model schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("valuation request invalid: {0}")]
    InvalidRequest(String),

    #[error("{path}: {source}")]
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

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Malformed(_) => "malformed",
            Error::DuplicateToken(_) => "duplicate_token",
            Error::DuplicateCategory { .. } => "duplicate_category",
            Error::Empty(_) => "empty",
            Error::UnknownTrait { .. } => "unknown_trait",
            Error::UnknownCategory(_) => "unknown_category",
            Error::UnknownToken(_) => "unknown_token",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::Diverged { .. } => "diverged",
            Error::AllTrialsFailed(_) => "all_trials_failed",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::SchemaMismatch(_) => "schema_mismatch",
            Error::InvalidRequest(_) => "invalid_request",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn parse(line: u64, field: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
