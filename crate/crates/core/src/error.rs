use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iterate left the map's domain at step {step} (value {value})")]
    DomainEscape { step: usize, value: f64 },

    #[error("integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("regularized Gram matrix is not positive definite; use alpha > 0")]
    SingularGram,

    #[error("could not draw a usable reservoir adjacency after {0} attempts")]
    DegenerateReservoir(usize),

    #[error("rejection sampling exhausted after {attempts} draws (range may be entirely periodic)")]
    RejectionCap { attempts: usize },

    #[error("reservoir mismatch: expected {expected}, found {found}")]
    ReservoirMismatch { expected: String, found: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
