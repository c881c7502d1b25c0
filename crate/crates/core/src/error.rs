use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("missing field `{0}` for this model family")]
    MissingField(&'static str),

    #[error("invalid rate matrix: {0}")]
    InvalidRateMatrix(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("switching rate {rate} exceeds the thinning bound {bound}")]
    RateBoundViolated { rate: f64, bound: f64 },

    #[error("non-finite observable at t = {t}")]
    NonFiniteObservable { t: f64 },

    #[error("averaging window is empty")]
    EmptyWindow,

    #[error("slope window holds {points} points, need at least {required}")]
    WindowTooShort { points: usize, required: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("generator is reducible")]
    Reducible,

    #[error("singular linear solve")]
    SingularSolve,

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid adjacency matrix: {0}")]
    InvalidAdjacency(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative rate: {0}")]
    NegativeRate(String),

    #[error("parameter must be positive: {0}")]
    NegativeParameter(String),

    #[error("per-capita factor F must be positive, got {0}")]
    NonPositiveF(f64),

    #[error("operation requires a {expected} model")]
    WrongFamily { expected: &'static str },
}
