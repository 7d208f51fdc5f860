use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dimension {0}: local dimensions must be at least 2")]
    InvalidDimension(usize),

    #[error("unsupported dimension {d_a}x{d_b}: only two-qubit states are supported here")]
    UnsupportedDimension { d_a: usize, d_b: usize },

    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("rank {rank} must lie in 1..={max}")]
    InvalidRank { rank: usize, max: usize },

    #[error("direction is not a unit vector (norm {0})")]
    NotUnit(f64),

    #[error("setting count mismatch: alice has {alice}, bob has {bob}")]
    SettingCountMismatch { alice: usize, bob: usize },

    #[error("state violates the {invariant} invariant: {detail}")]
    InvalidState {
        invariant: &'static str,
        detail: String,
    },

    #[error("observable violates the {invariant} invariant: {detail}")]
    InvalidObservable {
        invariant: &'static str,
        detail: String,
    },

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("setting pair ({x},{y}) has no recorded rounds")]
    EmptySetting { x: usize, y: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
