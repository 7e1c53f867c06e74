use core::fmt;

/// Errors shared across the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A Cholesky pivot was non-positive: the matrix is not positive
    /// definite (a solver iterate left the PD cone, or bad input).
    NotPositiveDefinite,
    /// An iterative eigenvalue scheme hit its iteration cap.
    NoConvergence,
    /// A matrix or vector contained a NaN or infinity.
    NonFinite,
    /// Operand dimensions disagree.
    DimensionMismatch { expected: usize, got: usize },
    /// Backtracking shrank the step below 1e-12 without finding an
    /// acceptable iterate; usually a lambda/radius misconfiguration or a
    /// numerically singular iterate.
    LineSearchFailed,
    /// A solver or generator configuration violates its invariants.
    InvalidConfig(&'static str),
    /// Generator or diagnostic parameters out of range.
    InvalidParams(&'static str),
    /// An AUC was requested from fewer than two curve points.
    TooFewPoints,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
            Error::NoConvergence => write!(f, "eigenvalue iteration did not converge"),
            Error::NonFinite => write!(f, "non-finite entry encountered"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::LineSearchFailed => write!(f, "line search failed: step shrank below 1e-12"),
            Error::InvalidConfig(msg) => write!(f, "invalid solver config: {msg}"),
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::TooFewPoints => write!(f, "need at least two ROC points"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
