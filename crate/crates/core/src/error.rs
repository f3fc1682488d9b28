use thiserror::Error;

/// Errors raised by model construction, bound evaluation and distance computation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index law has mean {0}; a strictly positive mean is required")]
    NonPositiveMean(f64),

    #[error("custom index pmf: {0}")]
    InvalidPmf(String),

    #[error("series tail bound unavailable: {0}")]
    NoTailBound(String),

    #[error("summand model is not centered: mean {0:e}")]
    NotCentered(f64),

    #[error("summand {index} is not a lattice distribution")]
    NotLattice { index: u64 },

    #[error("summands {first} and {second} live on incompatible lattices")]
    IncompatibleLattice { first: u64, second: u64 },

    #[error("support size {size} exceeds the configured cap {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("the variance limit of the summand schedule is unavailable")]
    MissingVarianceLimit,

    #[error("sup of the summand variances is unbounded")]
    UnboundedVariance,

    #[error("numerical integration failed to reach tolerance {tol:e} (estimate {estimate:e})")]
    Integration { tol: f64, estimate: f64 },

    #[error("root bracketing failed for target {0}")]
    Bracketing(f64),

    #[error("samples must be sorted and free of NaN")]
    UnsortedSamples,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
