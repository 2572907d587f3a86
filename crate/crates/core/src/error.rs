use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the pipeline. Each variant maps onto one of the
/// stable process exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("admissibility violated: {0}")]
    Admissibility(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("geometry failure: {0}")]
    Geometry(String),

    #[error("mesh tangled at layer {layer}: triangle {triangle} has signed area {area:e}")]
    Tangling {
        layer: usize,
        triangle: usize,
        area: f64,
    },

    #[error("mesh quality {quality:.4} below floor {floor} at layer {layer} (triangle {triangle})")]
    MeshQuality {
        layer: usize,
        triangle: usize,
        quality: f64,
        floor: f64,
    },

    #[error("singular system ({context}) at column {column}")]
    Singular { context: String, column: usize },

    #[error("Picard iteration did not converge at layer {layer}, m = {m}: residual history {history:?}")]
    PicardDivergence {
        layer: usize,
        m: f64,
        history: Vec<f64>,
    },

    #[error("compatibility violated: |mean| = {mean:e} exceeds {tolerance:e}")]
    Compatibility { mean: f64, tolerance: f64 },

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const IO: i32 = 4;
    pub const VERIFICATION: i32 = 5;
    pub const OPTIMIZER: i32 = 6;
    pub const USAGE: i32 = 64;
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Admissibility(_) | Error::Json(_) => exit_code::CONFIG,
            Error::Io(_) => exit_code::IO,
            Error::Verification(_) => exit_code::VERIFICATION,
            Error::Optimizer(_) => exit_code::OPTIMIZER,
            Error::InvalidInput(_)
            | Error::Geometry(_)
            | Error::Tangling { .. }
            | Error::MeshQuality { .. }
            | Error::Singular { .. }
            | Error::PicardDivergence { .. }
            | Error::Compatibility { .. }
            | Error::NonFinite(_) => exit_code::SOLVER,
        }
    }
}
