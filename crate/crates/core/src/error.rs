use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension n = {0}: the conformal exponent needs n >= 3")]
    Dimension(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("size mismatch: expected {expected} nodes, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("non-positive value {value} at node {node} (t = {t})")]
    NonPositive { node: usize, t: f64, value: f64 },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("decay fit domain error: {0}")]
    FitDomain(String),

    #[error("quotient undefined for the zero field")]
    ZeroField,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solve failed: zero pivot at row {row}")]
    LinearSolve { row: usize },

    #[error("eigen solve did not converge after {iterations} iterations (residual {residual:e})")]
    Spectral { iterations: usize, residual: f64 },

    #[error("monotone iteration breached ordering at iteration {iteration}, node {node}: {detail}")]
    MonotonicityBreach {
        iteration: usize,
        node: usize,
        detail: String,
    },

    #[error("Newton iteration could not keep the iterate positive (step {step:e})")]
    PositivityLost { step: f64 },

    #[error("barrier quadratic form is not coercive: lowest Rayleigh value {rayleigh}")]
    BarrierFailure { rayleigh: f64 },

    #[error("maximum principle violated: u = {value:e} at node {node}")]
    MaximumPrinciple { node: usize, value: f64 },

    #[error("invalid region: {0}")]
    Region(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
