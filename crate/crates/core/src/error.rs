use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("basis label {label} out of range 1..={dim}")]
    BasisLabel { label: usize, dim: usize },

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("permutation {map:?} is not an admissible oracle for d = {dim}")]
    Inadmissible { map: Vec<usize>, dim: usize },

    #[error("final distribution is not concentrated on a decision level (max probability {probability} at |{index}>)")]
    AmbiguousOutcome { index: usize, probability: f64 },

    #[error("invalid spin quantum number: {0}")]
    InvalidSpin(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pulse sequence has no blocks")]
    EmptySequence,

    #[error("readout design is rank deficient: rank {rank}, need {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("gate {label} not found at {path}")]
    MissingGate { label: String, path: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
