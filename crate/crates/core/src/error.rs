use std::time::Duration;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration: unknown column, invalid hyperparameters, malformed spec strings.
    #[error("configuration error: {0}")]
    Config(String),

    /// A CSV row could not be turned into an observation. `row` is 1-based and
    /// counts data rows (the header is not row 1).
    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("series violates invariant: {0}")]
    InvalidSeries(String),

    #[error("no observations for month {0}; gaps are not interpolated")]
    Gap(String),

    #[error("cannot normalize a constant series (min == max == {0})")]
    DegenerateRange(f64),

    #[error("insufficient history: need {needed} observations, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("feature `{label}` is undefined at t = {t}")]
    SpecValidation { label: String, t: usize },

    #[error("singular weighted design matrix; use a ridge penalty > 0")]
    Singular,

    #[error("model fitting failed: {0}")]
    Fit(String),

    #[error("forecast adapter error: {0}")]
    Adapter(String),

    #[error("forecast adapter timed out after {0:?}")]
    AdapterTimeout(Duration),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("all observations are identical; rank test variance is zero")]
    DegenerateVariance,

    #[error("query {id}: {source}")]
    Query {
        id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user input rather than by runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::SpecValidation { .. }
            | Error::InsufficientHistory { .. }
            | Error::Dimension { .. } => true,
            Error::Query { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
