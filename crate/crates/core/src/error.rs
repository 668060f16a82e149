use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid stochastic action: {0}")]
    InvalidStochasticAction(String),

    #[error("{what} must be positive, got {value}")]
    NotPositive { what: &'static str, value: f64 },

    #[error("{what} is not finite ({value})")]
    NonFinite { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("selected action {action} has zero probability")]
    ZeroProbabilityAction { action: usize },

    #[error("projection required but every confidence is zero")]
    AllConfidencesZero,

    #[error("bisection did not converge after {iterations} iterations (residual {residual:e})")]
    BisectionDidNotConverge { iterations: usize, residual: f64 },

    #[error("protocol violation: {0}")]
    Protocol(&'static str),

    #[error("unknown context {0}")]
    UnknownContext(usize),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("context {context} is covered with total weight {total} > 1")]
    CoverWeightViolation { context: usize, total: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by non-finite numbers in learner state.
    pub fn is_numeric_abort(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::BisectionDidNotConverge { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
