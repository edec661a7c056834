use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside the kernel domain: {0}")]
    Domain(String),

    #[error("adaptive quadrature did not reach tolerance within {budget} subdivisions")]
    QuadratureBudget { budget: usize },

    #[error("non-positive price factor {factor} at step {step}")]
    NonPositiveFactor { step: usize, factor: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("kernel not supported by this engine: {0}")]
    UnsupportedKernel(String),

    #[error("{steps} steps exceed the enumeration budget of {budget}; use the Monte Carlo estimator")]
    BudgetExceeded { steps: usize, budget: usize },

    #[error("no arbitrage at step {step} for the given prefix")]
    NoViolation { step: usize },

    #[error("arbitrage probability is identically zero on the tested range")]
    IdenticallyZero,

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
