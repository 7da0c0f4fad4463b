use thiserror::Error;

/// Errors raised by the library. Contract violations (width mismatches,
/// out-of-range parameters) are reported rather than panicking so that the
/// CLI can map them onto exit codes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("bit width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("bit width {0} outside supported range 0..=256")]
    WidthOutOfRange(usize),

    #[error("mask weight {k} out of range for width {width}")]
    WeightOutOfRange { width: usize, k: usize },

    #[error("invalid bit string literal: {0}")]
    Parse(String),

    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),

    #[error("broadcast carries scheme {found} but decision function expects {expected}")]
    SchemeMismatch { expected: String, found: String },

    #[error("{what} exceeds the exhaustive enumeration cap ({value} > {cap})")]
    ExhaustiveCap {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("codebook construction exhausted its budget of {budget} candidate draws after {accepted} words")]
    BudgetExhausted { budget: u64, accepted: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("malformed encoding: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
