use thiserror::Error;

use crate::pattern::MissingPattern;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid pattern distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("exact enumeration needs d <= {max}, got d = {dim}; use the Monte-Carlo estimate")]
    EnumerationTooLarge { dim: usize, max: usize },

    #[error("no closed-form Bayes predictor for {0} scenarios; use bayes_oracle_mc")]
    NoClosedForm(&'static str),

    #[error("pattern {0} has zero probability")]
    ZeroProbability(MissingPattern),

    #[error("oracle accepted {accepted} draws, at least {required} needed")]
    InsufficientSamples { accepted: usize, required: usize },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 for configuration
    /// and input problems, 3 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::NonFinite(_)
            | Error::ZeroProbability(_)
            | Error::InsufficientSamples { .. }
            | Error::EnumerationTooLarge { .. } => 3,
            _ => 2,
        }
    }
}
