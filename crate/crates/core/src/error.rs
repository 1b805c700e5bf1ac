use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is empty")]
    Empty,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian (asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("{0} did not converge")]
    ConvergenceFailure(&'static str),
    #[error("leading block is not invertible")]
    NotInvertible,
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is not similar to a nonnegative diagonal matrix")]
    NotDiagonalizableNonneg,
    #[error("factor {index} is not invertible")]
    NotInvertibleFactor { index: usize },
    #[error("core product is not invertible")]
    NotInvertibleCore,
    #[error("shift construction failed: {0}")]
    ShiftFailure(String),
    #[error("construction failed at stage `{stage}`: {reason}")]
    ConstructionFailure { stage: &'static str, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
