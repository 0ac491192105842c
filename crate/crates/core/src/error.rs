use thiserror::Error;

/// Errors raised by model construction, ensemble search, back-out and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("master equation is not ergodic (singular value ratio {ratio:.3e})")]
    NonErgodic { ratio: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported dimension {0}; only qubits (D = 2) are supported here")]
    UnsupportedDimension(usize),

    #[error("steady state is pure (|r_ss| = {norm}); no mixed-state decomposition exists")]
    DegenerateSteadyState { norm: f64 },

    #[error("no real eigenvector of the drift matrix was found")]
    NoRealEigenvector,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("rate graph is not irreducible")]
    Reducible,

    #[error("not a valid cycle: residual {residual:.3e} outside span of consecutive states")]
    InvalidCycle { residual: f64 },

    #[error("degenerate cycle: consecutive states {index} and {next} are (nearly) parallel")]
    DegenerateCycle { index: usize, next: usize },

    #[error("ensemble inconsistent with the master equation at memory state {index}: residual {residual:.3e}")]
    InconsistentEnsemble { index: usize, residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("transform matrix is not semi-unitary (deviation {deviation:.3e})")]
    NotSemiUnitary { deviation: f64 },

    #[error("conditioned state left its nominal memory state at t = {time} (deviation {deviation:.3e})")]
    ConfinementViolation { time: f64, deviation: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
