use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in document `{doc_id}` at frame {frame}")]
    NonFinite { doc_id: String, frame: usize },

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("symbol {symbol} out of range for vocabulary of size {vocab_size}")]
    SymbolOutOfRange { symbol: usize, vocab_size: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    /// EM, inference or training produced NaN/inf where a finite value was required.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("document id sets differ: {0}")]
    MismatchedIds(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable snake_case tag for machine-readable error reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::DuplicateId(_) => "duplicate_id",
            Error::SymbolOutOfRange { .. } => "symbol_out_of_range",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Empty(_) => "empty_input",
            Error::Numerical(_) => "numerical_failure",
            Error::MismatchedIds(_) => "mismatched_ids",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }
}
