use std::io;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("numerical overflow in tape at node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },
    #[error("non-differentiable operation: {0}")]
    NonDifferentiable(String),
    #[error("non-scalar output: shape {rows}x{cols}")]
    NonScalar { rows: usize, cols: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integration blow-up at t = {t}")]
    BlowUp { t: f64 },
    #[error("step count exceeded ({steps} steps) before reaching t = {t1}")]
    StepLimit { steps: usize, t1: f64 },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("missing derivatives: {0}")]
    MissingDerivatives(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("parameter grid exhausted")]
    GridExhausted,
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for failures caused by the numbers rather than by inputs or IO.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::BlowUp { .. }
                | Error::StepLimit { .. }
                | Error::Solver(_)
                | Error::NonFiniteLoss { .. }
        )
    }
}
