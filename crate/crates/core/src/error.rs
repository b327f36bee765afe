use thiserror::Error;

/// Errors raised by the solver framework.
///
/// Non-convergence of iterative solvers is not an error: it is reported
/// through the `converged` flag of the corresponding report so that callers
/// can inspect the partial iterate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("contraction margin violated: m_C = {m_c} <= alpha_1 = {alpha1}")]
    MarginViolated { m_c: f64, alpha1: f64 },

    #[error("invalid constants: {0}")]
    InvalidConstants(String),

    #[error("history buffer full (capacity {capacity})")]
    HistoryOverflow { capacity: usize },

    #[error("history index {index} beyond stored length {len}")]
    HistoryIndex { index: usize, len: usize },

    #[error("step {step} failed in {stage}: {message}")]
    StepFailure { step: usize, stage: String, message: String },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("oracle error: {0}")]
    Oracle(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
