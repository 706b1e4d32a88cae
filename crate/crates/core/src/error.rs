use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical precondition failed (singular kernel, point outside a box, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid experiment or geometry configuration. `field` names the offending
    /// parameter using a dotted path when one is known.
    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    /// A caller violated an operation contract (e.g. a test function that does
    /// not vanish on fixed nodes).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("solver did not converge after {iterations} iterations (relative gradient {gradient:.3e})")]
    NotConverged { iterations: usize, gradient: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Config { .. } => "config",
            Error::Contract(_) => "contract",
            Error::NotConverged { .. } => "not_converged",
            Error::Unsupported(_) => "unsupported",
            Error::Io { .. } => "io",
            Error::Serde(_) => "serde",
        }
    }
}
