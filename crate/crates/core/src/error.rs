use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

/// Result alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Failures raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input contained NaN or an infinity.
    NonFinite(&'static str),
    /// Vector / matrix shapes do not agree.
    DimensionMismatch {
        /// Which argument was wrong.
        what: &'static str,
        /// Expected size.
        expected: usize,
        /// Size that was passed.
        found: usize,
    },
    /// A matrix that must be symmetric is not.
    NotSymmetric(&'static str),
    /// Ridge `A` (or a covariance) failed the definiteness check.
    NotPositiveDefinite {
        /// Which matrix.
        what: &'static str,
        /// Smallest eigenvalue found.
        min_eigenvalue: f64,
    },
    /// Lasso `A` is singular or too badly conditioned.
    IllConditioned {
        /// 2-norm condition number.
        condition: f64,
    },
    /// Bad scalar argument or grid.
    InvalidArgument(String),
    /// An operation that only makes sense for one penalty family.
    WrongPenalty(&'static str),
    /// Iterative solver stopped before reaching its tolerance.
    NoConvergence {
        /// Solver name.
        what: &'static str,
        /// Iterations (or sweeps) performed.
        iterations: usize,
        /// Final optimality residual.
        residual: f64,
    },
    /// The empirical objective is not strongly convex at the solution.
    RankDeficient {
        /// Smallest eigenvalue of the Hessian.
        min_eigenvalue: f64,
    },
    /// A leave-one-out refit failed.
    Fold {
        /// Held-out observation.
        fold: usize,
        /// Position in the lambda grid, when known.
        lambda_index: Option<usize>,
        /// Underlying failure.
        source: Box<Error>,
    },
    /// A structural property that must hold by construction was violated.
    Structure(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::DimensionMismatch { what, expected, found } => {
                write!(f, "{what}: expected dimension {expected}, found {found}")
            }
            Error::NotSymmetric(what) => write!(f, "{what} is not symmetric"),
            Error::NotPositiveDefinite { what, min_eigenvalue } => write!(
                f,
                "{what} is not positive definite (min eigenvalue {min_eigenvalue:e})"
            ),
            Error::IllConditioned { condition } => {
                write!(f, "penalty matrix is ill-conditioned (condition number {condition:e})")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::WrongPenalty(msg) => write!(f, "wrong penalty family: {msg}"),
            Error::NoConvergence { what, iterations, residual } => write!(
                f,
                "{what} did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::RankDeficient { min_eigenvalue } => write!(
                f,
                "objective is not strongly convex: minimum Hessian eigenvalue {min_eigenvalue:e}"
            ),
            Error::Fold { fold, lambda_index, source } => match lambda_index {
                Some(l) => write!(f, "leave-one-out fold {fold} at lambda index {l}: {source}"),
                None => write!(f, "leave-one-out fold {fold}: {source}"),
            },
            Error::Structure(msg) => write!(f, "structural check failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
