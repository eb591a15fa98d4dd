use thiserror::Error;

use crate::field::ScalarField;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field lives on a different grid")]
    GridMismatch,

    #[error("field has {got} values, grid needs {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("{name} must be non-negative, found {value} at node {index}")]
    Negative {
        name: &'static str,
        index: usize,
        value: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("conjugate gradients did not converge in {iterations} iterations (residual {residual:.3e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("eigenvalue iteration did not converge in {iterations} iterations (relative change {change:.3e})")]
    Eigenvalue { iterations: usize, change: f64 },

    /// Newton made no progress; `best` is the iterate with the smallest residual.
    #[error("Newton stagnated after {iterations} iterations (residual {residual:.3e})")]
    NewtonStagnation {
        iterations: usize,
        residual: f64,
        best: Box<ScalarField>,
    },

    #[error("epsilon continuation exhausted {levels} levels (last H1 step {last_step:.3e})")]
    ContinuationBudget { levels: usize, last_step: f64 },

    #[error("malformed field csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short name for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::GridMismatch => "grid_mismatch",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::Negative { .. } => "negative",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::LinearSolver { .. } => "linear_solver",
            Error::Eigenvalue { .. } => "eigenvalue",
            Error::NewtonStagnation { .. } => "newton_stagnation",
            Error::ContinuationBudget { .. } => "continuation_budget",
            Error::Csv { .. } => "csv",
            Error::Io(_) => "io",
        }
    }
}
