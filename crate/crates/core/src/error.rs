use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Diagnostics from an adaptive quadrature run that did not reach its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureFailure {
    pub context: String,
    pub estimate: f64,
    pub error_estimate: f64,
    pub intervals: usize,
    pub evaluations: usize,
    pub reason: String,
}

impl std::fmt::Display for QuadratureFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} (estimate {:e}, error estimate {:e}, {} intervals, {} evaluations)",
            self.context,
            self.reason,
            self.estimate,
            self.error_estimate,
            self.intervals,
            self.evaluations
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical parameter is outside its admissible range.
    #[error("domain error: `{name}` = {value} ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("numerical error: {0}")]
    Quadrature(Box<QuadratureFailure>),

    #[error("numerical error: non-finite {what}")]
    NonFinite { what: &'static str },

    #[error("config parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    ConfigParse { line: Option<usize>, message: String },

    #[error("config validation error at `{field}`: {message}")]
    ConfigValidation { field: String, message: String },

    #[error("unknown config key `{key}`{}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    UnknownKey { key: String, line: Option<usize> },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("sweep point {index} ({parameter} = {value}) failed: {source}")]
    SweepPoint {
        index: usize,
        parameter: String,
        value: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigValidation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<QuadratureFailure> for Error {
    fn from(f: QuadratureFailure) -> Self {
        Error::Quadrature(Box::new(f))
    }
}
