use alloc::string::String;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{value} lies outside the open interval (-1, 1)")]
    Domain { value: f64 },

    #[error("operator needs {required_bytes} bytes, budget is {budget_bytes}")]
    BudgetExceeded { required_bytes: u64, budget_bytes: u64 },

    #[error("operator is not rescaled into (-1, 1) (recorded bound: {bound:?})")]
    NotRescaled { bound: Option<f64> },

    #[error("coefficient series is identically zero")]
    ZeroSeries,

    #[error("proposal normalizer is not finite: {0}")]
    InfiniteNormalizer(String),

    #[error("survival probability underflowed at level {level}")]
    SurvivalUnderflow { level: usize },

    #[error("dense materialization limited to dimension {max}, got {dim}")]
    TooLargeForDense { dim: usize, max: usize },

    #[error("integration range [{lo}, {hi}] does not overlap the grid")]
    EmptyOverlap { lo: f64, hi: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
