use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("malformed obstacle: h - s = {gap} <= 0 inside the sensing closure")]
    MalformedObstacle { gap: f64 },

    #[error("state within {distance:e} of the target; density is unbounded there")]
    NearTarget { distance: f64 },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("initial condition lies inside unsafe set of obstacle {0}")]
    UnsafeInitialCondition(usize),

    #[error("verification grid intersects the target neighbourhood (radius {delta})")]
    GridIntersectsTarget { delta: f64 },

    #[error("state outside the navigation-function domain: {0}")]
    OutsideDomain(String),

    #[error("task obstacle rejected: {0}")]
    ObstacleRejected(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
