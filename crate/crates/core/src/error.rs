use std::path::PathBuf;

use overland_skel::SkelError;
use thiserror::Error;

use crate::boundary::BoundaryError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Dem {
        path: String,
        line: usize,
        message: String,
    },

    #[error("negative water height {h:e} at cell ({i}, {j}), t = {t}; the time step is too large (lower scheme.cfl)")]
    NegativeHeight { i: usize, j: usize, h: f64, t: f64 },

    #[error("non-finite state at cell ({i}, {j}), t = {t}")]
    NonFinite { i: usize, j: usize, t: f64 },

    #[error("Bernoulli head is undefined on a dry cell")]
    DryCell,

    #[error("friction coefficient must be positive (got {0})")]
    NonPositiveCoefficient(f64),

    #[error(transparent)]
    Boundary(#[from] BoundaryError),

    #[error(transparent)]
    Decomposition(#[from] SkelError),

    #[error("preset '{0}' has no analytic solution to converge against")]
    PresetWithoutOracle(String),

    #[error("aborted because another worker failed")]
    PeerAborted,
}

impl Error {
    /// Process exit code: 1 for configuration problems, 2 for I/O, 3 for a
    /// numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Dem { .. } => 2,
            Error::NegativeHeight { .. } | Error::NonFinite { .. } | Error::PeerAborted => 3,
            Error::Boundary(BoundaryError::SupercriticalInflowUnderconstrained { .. }) => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
