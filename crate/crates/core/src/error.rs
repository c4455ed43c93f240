use thiserror::Error;

/// Errors raised by the numerical layers (geometry, solver, control, monitors, simulation).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("points are coincident (separation {separation:e} m); bearing is undefined")]
    CoincidentPoints { separation: f64 },

    #[error("vector is not unit length (norm {norm})")]
    NotUnit { norm: f64 },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("at least 3 beacons are required, got {count}")]
    TooFewBeacons { count: usize },

    #[error("{positions} beacon positions but {weights} weights")]
    LengthMismatch { positions: usize, weights: usize },

    #[error("beacon {index} has non-positive weight {weight}")]
    NonPositiveWeight { index: usize, weight: f64 },

    #[error("beacons are collinear (singular value ratio {ratio:e})")]
    Collinear { ratio: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },

    #[error("beacon velocity is zero; the heading target of the moving-beacon certificate is undefined")]
    ZeroTargetVelocity,

    #[error("Fermat-Weber solve did not converge ({status:?}, residual {residual:e})")]
    SolverFailed {
        status: crate::fwlp::SolveStatus,
        residual: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
