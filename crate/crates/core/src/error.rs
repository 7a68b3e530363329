use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("too few points on axis {axis}: {points} (minimum {min})")]
    TooFewPoints { axis: usize, points: usize, min: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("superposition vanishes everywhere")]
    ZeroField,

    #[error("snapshot index {index} has no neighbours for centred differencing (series length {len})")]
    EdgeIndex { index: usize, len: usize },

    #[error("point lies in a node region (density below floor)")]
    NodeRegion,

    #[error("velocity undefined at the query point")]
    UndefinedVelocity,

    #[error("action field not available")]
    MissingAction,

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("no detectable fringes on the screen line")]
    NoFringes,

    #[error("quadrature grid too small: boundary amplitude fraction {0:.3e} exceeds 1e-6")]
    QuadratureTooSmall(f64),

    #[error("no exact propagator available for this potential")]
    NoOracle,

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
