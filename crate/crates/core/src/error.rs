use thiserror::Error;

/// Errors produced by the simulation and control library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not antisymmetric (symmetric part norm {0:.3e})")]
    NotAntisymmetric(f64),

    #[error("not a rotation matrix (orthogonality defect {orthogonality:.3e}, det {det})")]
    NotRotation { orthogonality: f64, det: f64 },

    #[error("inertia matrix is numerically singular (condition number {0:.3e})")]
    SingularInertia(f64),

    #[error("invalid body parameters: {0}")]
    InvalidBody(String),

    #[error("expected {expected} wrenches, got {got}")]
    WrenchCount { expected: usize, got: usize },

    #[error("rotation error is too close to the antipodal set (trace {0})")]
    AntipodalRotation(f64),

    #[error("regularizer Hessian is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("non-finite state at t = {time}: {what}")]
    NonFinite { time: f64, what: String },

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
