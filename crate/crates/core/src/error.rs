use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline.
///
/// Every variant maps onto one of three process exit classes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing reference data for cusip {0}")]
    MissingReference(String),

    #[error("missing market context for week {0}")]
    MissingContext(String),

    #[error("unknown grade for cusip {0}")]
    UnknownGrade(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("design matrix is rank deficient; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("ill-conditioned system (condition number {condition:.3e}): {hint}")]
    IllConditioned { condition: f64, hint: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parse(row: usize, column: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            column: column.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::RankDeficient { .. } | Error::IllConditioned { .. } | Error::Numerical(_) => 4,
            _ => 3,
        }
    }

    /// Short machine-readable tag for the error JSON emitted by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::MissingReference(_) => "missing_reference",
            Error::MissingContext(_) => "missing_context",
            Error::UnknownGrade(_) => "unknown_grade",
            Error::InsufficientData(_) => "insufficient_data",
            Error::InvalidInput(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::Numerical(_) => "numerical",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
