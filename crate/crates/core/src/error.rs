use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the extraction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size limit exceeded: {what} needs {requested} qubits but the configured cap is {cap}")]
    SizeLimit {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid Pauli label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("physicality error: {0}")]
    Physicality(String),

    #[error("non-physical channel: diagonal weight of {label} is {value:e}, below -{floor:e}")]
    NonPhysicalChannel {
        label: String,
        value: f64,
        floor: f64,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures caused by an input that is not a valid physical object.
    pub fn is_physicality(&self) -> bool {
        matches!(self, Error::Physicality(_) | Error::NonPhysicalChannel { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
