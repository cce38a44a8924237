use thiserror::Error;

/// Failures of the small dense factorizations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigError {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix is singular to working precision (pivot {pivot:e} at row {row})")]
    Singular { row: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Errors raised by the limited-memory state.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LqnError {
    #[error("middle matrix M of the compact representation is singular")]
    SingularM,
    #[error("vector length {got} does not match state dimension {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Errors raised while solving the cubic subproblem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("Newton iteration did not converge within {0} iterations")]
    MaxIterations(usize),
    #[error("Psi^T Psi is not positive definite; memory must be reset")]
    NotPositiveDefinite,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("all probe vectors were annihilated by the projection")]
    DegenerateProbe,
    #[error("solve exceeded its deadline")]
    Timeout,
    #[error(transparent)]
    Lqn(#[from] LqnError),
}

impl From<EigError> for SolveError {
    fn from(e: EigError) -> Self {
        match e {
            EigError::NotPositiveDefinite { .. } => SolveError::NotPositiveDefinite,
            other => SolveError::Domain(other.to_string()),
        }
    }
}

/// Errors from the outer optimization loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArcError {
    #[error("predicted decrease {0:e} is not positive")]
    DegenerateModel(f64),
    #[error("non-finite objective or gradient at iteration {iter}")]
    NonFinite { iter: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown {kind} `{name}`; available: {available}")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },
}
