use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("evaluation point coincides with the pole at {0}")]
    SingularPoint(f64),

    #[error("point {0} lies outside the admissible range")]
    OutOfDomain(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("mesh would need {needed} nodes (limit {limit})")]
    MeshTooLarge { needed: usize, limit: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("|u| = {0} exceeds the overflow guard")]
    Overflow(f64),

    #[error("Newton did not converge in {max_iter} iterations (last residual {:e})", history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { max_iter: usize, history: Vec<f64> },

    #[error("Jacobian is numerically singular")]
    SingularJacobian,

    #[error("no critical point found: every ascent ran into the boundary")]
    NoCriticalPoint,

    #[error("|u| falls below the certification threshold near x = {0} without a sign change")]
    AmbiguousZero(f64),

    #[error("no extremum of the expected sign for peak {0}")]
    MissingPeak(usize),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
