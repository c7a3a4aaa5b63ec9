use thiserror::Error;

/// Errors produced across the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MestError {
    #[error("invalid loss parameters: {0}")]
    InvalidLoss(String),

    #[error("invalid penalty parameters: {0}")]
    InvalidPenalty(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered during fit ({0})")]
    NonFiniteEncountered(&'static str),

    #[error("solver did not converge after {iterations} iterations (kkt residual {kkt_residual:.3e})")]
    MaxIterExceeded { iterations: usize, kkt_residual: f64 },

    #[error("mean loss {0:.3e} is too small for the BIC criterion")]
    DegenerateFit(f64),

    #[error("no lambda on the grid produced a usable fit")]
    AllFitsFailed,

    #[error("error law and loss are incompatible: E[phi(eps)] = {0:.4e} is not zero")]
    NonCenteredScore(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{failed} of {total} fits failed, above the 1% budget")]
    FailureBudgetExceeded { failed: usize, total: usize },

    #[error("report parse error: {0}")]
    Report(String),
}

pub type Result<T> = std::result::Result<T, MestError>;
