use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice has no atoms left after removing holes")]
    EmptyLattice,

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("sites {0} and {1} coincide")]
    CoincidentSites(usize, usize),

    #[error("need at least {needed} atoms, got {got}")]
    TooFewAtoms { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("Krylov step failed: residual {residual:e} above tolerance {tol:e}")]
    KrylovBreakdown { residual: f64, tol: f64 },

    #[error("system of {n} spins exceeds the limit of {max}")]
    SystemTooLarge { n: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("checkpoint {checkpoint} us lies beyond schedule end {end} us")]
    CheckpointBeyondEnd { checkpoint: f64, end: f64 },

    #[error("no interior minimum in the supplied series")]
    NoInteriorMinimum,

    #[error("detection-error map is not invertible for these probabilities")]
    NotInvertible,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure came from the numerics rather than from user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::KrylovBreakdown { .. } | Error::NoInteriorMinimum | Error::NotInvertible | Error::NotNormalized(_)
        )
    }
}
