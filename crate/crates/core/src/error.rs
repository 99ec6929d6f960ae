use std::path::PathBuf;

use thiserror::Error;

use crate::numerics::ComplexMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} exceeds the supported limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String, last_state: Option<Box<ComplexMatrix>> },

    #[error("no steady state: smallest eigenvalue magnitude {smallest_eigenvalue:e}")]
    NoSteadyState { smallest_eigenvalue: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),

    #[error("invalid rule set: {0}")]
    InvalidRule(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Self::IntegrationFailure { .. } | Self::NoSteadyState { .. } | Self::Numerical(_) | Self::DimensionLimit { .. }
        )
    }
}
