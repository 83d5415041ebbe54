use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial degree {0} outside supported range 1..={max}", max = crate::reference_ops::MAX_DEGREE)]
    UnsupportedDegree(usize),

    #[error("index {index} out of range for degree {degree}")]
    IndexOutOfRange { index: usize, degree: usize },

    #[error("evaluation point {0} outside [-1, 1]")]
    PointOutOfRange(f64),

    #[error("zero density")]
    ZeroDensity,

    #[error("nonpositive density {0}")]
    NonPositiveDensity(f64),

    #[error("non-finite state component")]
    NonFinite,

    #[error("inadmissible state (rho = {rho}, p = {p})")]
    Inadmissible { rho: f64, p: f64 },

    #[error("zero normal vector")]
    ZeroNormal,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("nonpositive jacobian {jacobian} in element {element}")]
    NonPositiveJacobian { element: usize, jacobian: f64 },

    #[error("2:1 balance violated at element {0}")]
    Unbalanced(usize),

    #[error("no boundary condition bound to tag {0}")]
    UnboundBoundary(String),

    #[error("positivity failure in element {element} at t = {time}: {detail}")]
    Positivity {
        element: usize,
        time: f64,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Positivity { .. } | Error::Inadmissible { .. } => "positivity_failure",
            Error::NonFinite => "nonfinite_state",
            Error::Config(_) | Error::UnsupportedDegree(_) | Error::UnboundBoundary(_) => {
                "invalid_config"
            }
            Error::Io { .. } => "io_error",
            Error::InvalidMesh(_)
            | Error::NonPositiveJacobian { .. }
            | Error::Unbalanced(_) => "invalid_mesh",
            _ => "internal_error",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
