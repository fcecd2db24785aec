use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor or operation argument violated its precondition.
    InvalidArgument(&'static str),
    /// A point outside the closed domain `[-L, L]^d`.
    OutOfDomain,
    /// A basis or cell index outside `0..J` in some direction.
    IndexOutOfRange,
    DimensionMismatch { expected: usize, found: usize },
    /// The linear solver stopped before reaching its tolerance.
    LinearSolver { iterations: usize, residual: f64 },
    /// A matrix that should be positive definite produced a non-positive pivot.
    NotPositiveDefinite { row: usize },
    Newton { iterations: usize, residual: f64 },
    /// A time step failed; `step` is the 1-based step index.
    Step { step: usize, source: alloc::boxed::Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::OutOfDomain => f.write_str("point lies outside the domain"),
            Error::IndexOutOfRange => f.write_str("index out of range"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::LinearSolver { iterations, residual } => write!(
                f,
                "linear solver did not converge after {iterations} iterations (relative residual {residual:e})"
            ),
            Error::NotPositiveDefinite { row } => {
                write!(f, "matrix is not positive definite (pivot {row})")
            }
            Error::Newton { iterations, residual } => write!(
                f,
                "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::Step { step, .. } => write!(f, "time step {step} failed"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::Step { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
