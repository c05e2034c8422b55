use thiserror::Error;

/// Errors raised by the learner, the plant model and the experiment runtime.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("data matrices are frozen; accumulation rejected")]
    Frozen,

    #[error("data matrices are not frozen yet")]
    NotFrozen,

    #[error("data not persistently exciting: normalized min eigenvalue {min_eigenvalue:e}")]
    NotPersistentlyExciting { min_eigenvalue: f64 },

    #[error("degenerate data: z-sequence is not persistently exciting (W is singular)")]
    DegenerateData,

    #[error("second-order condition violated: P_mm is not positive definite")]
    SecondOrderConditionViolated,

    #[error("frozen pair is not stabilizable (value iteration diverged)")]
    NotStabilizable,

    #[error(
        "policy iteration did not converge in {iterations} iterations (residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Process exit code for the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => 2,
            Error::NotPersistentlyExciting { .. } | Error::DegenerateData => 3,
            Error::NonConvergence { .. } => 4,
            Error::Io(_) => 1,
            _ => 5,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
