//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction, estimation, and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    #[error("non-finite entry encountered in {0}")]
    NonFinite(&'static str),

    #[error("zero-dimensional domain for {0}")]
    ZeroDimensional(&'static str),

    #[error("rank-deficient spanning set: rank {rank} < requested dimension {dim}")]
    RankDeficient { rank: usize, dim: usize },

    #[error("subspaces are not complementary: {0}")]
    NonComplementary(String),

    #[error("dimension collapse: operator maps a {dim}-dimensional subspace onto rank {rank}")]
    DimensionCollapse { dim: usize, rank: usize },

    #[error("enumeration exhausted after {scanned} elements without a hit")]
    Exhausted { scanned: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("projection validation failed: {0}")]
    ProjectionInvalid(String),

    #[error("spectrum estimate is not monotone: mu[{index}] = {value} exceeds mu[{}] = {prev} beyond tolerance", index - 1)]
    NonMonotoneSpectrum {
        index: usize,
        value: f64,
        prev: f64,
    },

    #[error("quasicompactness proxy failed: {0}")]
    QuasicompactnessFailure(String),

    #[error("decomposition level {level} failed: {reason}")]
    LevelFailure { level: usize, reason: String },

    #[error("unknown catalog scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown trace `{0}` in report")]
    UnknownTrace(String),

    #[error("scenario rejected: {0}")]
    ScenarioInvalid(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
