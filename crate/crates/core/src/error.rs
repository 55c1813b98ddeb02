//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by model evaluation, estimation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pair: indices must differ (got {0})")]
    InvalidPair(usize),

    #[error("index {index} out of bounds for {m} alternatives")]
    IndexOutOfBounds { index: usize, m: usize },

    #[error("invalid position {k} for {m} positions")]
    InvalidPosition { k: usize, m: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("parameter vector contains non-finite values")]
    NonFiniteParameter,

    #[error("need at least {min} alternatives, got {m}")]
    TooFewAlternatives { m: usize, min: usize },

    #[error("Gaussian scales must be strictly positive and finite")]
    InvalidScales,

    #[error("custom density is not symmetric about 0 (max deviation {max_dev:e})")]
    AsymmetricDensity { max_dev: f64 },

    #[error("density is not strictly positive at x = {x}")]
    NonPositiveDensity { x: f64 },

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("profile must contain at least one ranking")]
    EmptyProfile,

    #[error("breaking graph has no positive edge weight")]
    EmptyBreaking,

    #[error("negative weight {value} on {what}")]
    NegativeWeight { what: &'static str, value: f64 },

    #[error("exact mode limited to m <= {max} (got m = {m}); use the Monte-Carlo variant")]
    ExactModeTooLarge { m: usize, max: usize },

    #[error("probability reached {value} exactly; log-likelihood undefined")]
    LogDomain { value: f64 },

    #[error("grid must be strictly increasing with uniform spacing")]
    InvalidGrid,

    #[error("parameter norm {norm:.3} exceeded bound {bound}; objective appears unbounded")]
    Diverged { norm: f64, bound: f64 },

    #[error("optimizer stopped unconverged: gradient norm {gradient_norm:e} after {iterations} iterations")]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error("Fisher information matrix is singular")]
    SingularInformation,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
