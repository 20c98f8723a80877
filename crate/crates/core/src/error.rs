use std::path::PathBuf;

use crate::grid::CflReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("CFL condition violated: {0}")]
    Cfl(CflReport),

    #[error("simulation diverged at time step {time_index}{}", transmit.map(|p| format!(" (transmission {p})")).unwrap_or_default())]
    Divergence {
        time_index: usize,
        transmit: Option<usize>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Attach the transmission index to a divergence error.
    pub(crate) fn in_transmission(self, p: usize) -> Self {
        match self {
            Error::Divergence { time_index, .. } => Error::Divergence {
                time_index,
                transmit: Some(p),
            },
            other => other,
        }
    }
}
