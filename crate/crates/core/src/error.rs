//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: missing column `{column}`")]
    Schema { column: String },

    #[error("domain error at row {row}: {message}")]
    Domain { row: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("non-positive prediction: {0}")]
    NonPositivePrediction(String),

    #[error("retrieval token count is zero")]
    ZeroRetrieval,

    #[error("empty input")]
    EmptyInput,

    #[error("non-positive input: {0}")]
    NonPositiveInput(f64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("observations have zero variance")]
    ZeroVariance,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no start converged: {0}")]
    NoConvergence(String),

    #[error("only one group under {0}")]
    SingleGroup(String),

    #[error("missing group: {0}")]
    MissingGroup(String),

    #[error("insufficient points: {0}")]
    InsufficientPoints(String),

    #[error("fitted slope is zero; threshold undefined")]
    ZeroSlope,

    #[error("budget {budget} does not exceed d_min {d_min}")]
    BudgetTooSmall { budget: f64, d_min: f64 },

    #[error("no baseline record for {0}")]
    MissingBaseline(String),

    #[error("catalog is empty")]
    EmptyCatalog,

    #[error("budget {budget} exceeds catalog total of {total} tokens")]
    BudgetExceedsCorpus { budget: u64, total: u64 },

    #[error("seed mismatch: {left} vs {right}")]
    SeedMismatch { left: u64, right: u64 },

    #[error("permutation digest mismatch")]
    DigestMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
