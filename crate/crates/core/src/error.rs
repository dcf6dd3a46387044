use thiserror::Error;

/// Failure raised by any lab operation, tagged with the module and operation
/// that produced it.
#[derive(Debug, Error)]
#[error("{module}::{op}: {kind}")]
pub struct Error {
    pub module: &'static str,
    pub op: &'static str,
    #[source]
    pub kind: ErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ErrorKind {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid too small: truncation estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    GridTooSmall { estimate: f64, tolerance: f64 },
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("region exceeds grid: {0}")]
    RegionExceedsGrid(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate field: {0}")]
    Degenerate(String),
    #[error("linear solve failed after {iterations} iterations (residual {residual:.3e})")]
    LinearSolve { iterations: usize, residual: f64 },
    #[error("tolerance {tolerance:.3e} not met within {panels} panels")]
    ToleranceNotMet { tolerance: f64, panels: usize },
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("hypothesis fails: {0}")]
    HypothesisFails(String),
    #[error("no admissible constant up to {cap:e}")]
    NoAdmissibleConstant { cap: f64 },
    #[error("field has no analytic derivatives")]
    NonAnalytic,
    #[error("support violation: {0}")]
    Support(String),
    #[error("invalid coefficients: {0}")]
    Coefficients(String),
    #[error("unresolved: {0}")]
    Unresolved(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl ErrorKind {
    pub fn at(self, module: &'static str, op: &'static str) -> Error {
        Error { module, op, kind: self }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
