use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mean value left the open set on which `f` is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration blew up at t = {time}")]
    IntegrationBlowup { time: f64 },

    #[error(
        "solver failed after {iterations} iterations (last residual {residual:.3e}): {reason}"
    )]
    SolverFailure {
        iterations: usize,
        residual: f64,
        reason: String,
        /// Trace of the mean value across outer iterations, when available.
        mean_history: Vec<Vec<f64>>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
