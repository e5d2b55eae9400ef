use thiserror::Error;

/// Errors surfaced by the math core and the protocol harnesses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate register label `{0}` in layout")]
    DuplicateLabel(String),

    #[error("unknown register label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("operator is not Hermitian (max |M - M†| entry = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not a valid state: {0}")]
    NotAState(String),

    #[error("matrix is not unitary (max |U†U - I| entry = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error(
        "total dimension {dim} exceeds the resource guard {max} (override with CLONEGAME_MAX_DIM)"
    )]
    ResourceGuard { dim: usize, max: usize },

    #[error("eigensolver failed to converge on a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("attack violates the no-pre-shared-entanglement structure: {0}")]
    Structural(String),

    #[error("oracle query budget exceeded: used {used}, budget {budget}")]
    QueryBudget { used: u64, budget: u64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
