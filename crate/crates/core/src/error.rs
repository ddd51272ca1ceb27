use thiserror::Error;

use crate::linsolve::SolveReport;

pub type Result<T, E = ChnsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ChnsError {
    #[error("phase value {value} at cell ({i}, {j}) is outside (-1, 1)")]
    OutOfBounds { value: f64, i: usize, j: usize },

    #[error("difference quotient undefined for a = {a}, x = {x}; both must be positive")]
    Domain { a: f64, x: f64 },

    #[error("right-hand side has mean {mean:e}, tolerance {tol:e}")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("linear solver did not converge: {0}")]
    NoConvergence(SolveReport),

    #[error("Krylov breakdown after restart: {0}")]
    Breakdown(SolveReport),

    #[error("{stage} linear solve failed: {report}")]
    LinearSolve { stage: &'static str, report: SolveReport },

    #[error("Newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NewtonFailure { iterations: usize, residual: f64 },

    #[error("outer coupling iteration stalled after {iterations} passes (update {update:e})")]
    OuterNoConvergence { iterations: usize, update: f64 },

    #[error("phase field left (-1, 1) at step {step}")]
    PositivityBreach { step: usize },

    #[error("{name} invariant violated at step {step} (value {value:e})")]
    InvariantBreach {
        name: &'static str,
        step: usize,
        value: f64,
    },

    #[error("invalid configuration for `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ChnsError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        ChnsError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
