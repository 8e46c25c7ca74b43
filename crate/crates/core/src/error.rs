use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite numeric input: {0}")]
    NonFinite(&'static str),

    #[error("probability {prob} below floor {floor}")]
    ProbabilityTooSmall { prob: f64, floor: f64 },

    #[error("value {value} out of range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("no owner resolves for the requested object")]
    NoOwner,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("conflicting defaults: {0}")]
    Conflict(String),

    #[error("enumeration of {size} tuples exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSchema(_) => "invalid_schema",
            Error::SchemaMismatch(_) => "schema_mismatch",
            Error::InvalidConfig(_) => "invalid_config",
            Error::NonFinite(_) => "non_finite",
            Error::ProbabilityTooSmall { .. } => "probability_too_small",
            Error::OutOfRange { .. } => "out_of_range",
            Error::NoOwner => "no_owner",
            Error::Empty(_) => "empty",
            Error::Conflict(_) => "conflict",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::Infeasible(_) => "infeasible",
            Error::Parse { .. } => "parse",
            Error::Round { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
