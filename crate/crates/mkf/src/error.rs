use thiserror::Error;

/// Errors raised by the moment-propagation and filtering code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("trigonometric argument is not affine in the variables: {0}")]
    NonAffineTrigArg(String),

    #[error("characteristic-function derivative order {order} exceeds the cap of {cap}")]
    DerivativeOrderCap { order: u32, cap: u32 },

    #[error("imaginary residue {residue:e} exceeds tolerance {tol:e}; result is not real")]
    ImaginaryResidue { residue: f64, tol: f64 },

    #[error("expansion exceeded the cap of {cap} terms")]
    TermCapExceeded { cap: usize },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("{context} is not positive definite")]
    NotPositiveDefinite { context: &'static str },

    #[error("covariance eigenvalue {eigenvalue:e} is below the positive-semidefinite tolerance")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("Jacobi eigendecomposition did not converge within {0} sweeps")]
    EigNonConvergence(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("{file}:{line}: malformed line: {msg}")]
    DataFormat {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("filter diverged at step {step}: {msg}")]
    FilterDiverged { step: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
