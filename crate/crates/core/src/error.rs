use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input violated a documented invariant.
    #[error("invalid {name}: {reason}")]
    Invalid { name: &'static str, reason: String },

    #[error("non-finite {0}")]
    NonFinite(&'static str),

    /// The integrated position left the escape bound; usually a too-large dt.
    #[error("particle escaped to x = {position:.3} nm at t = {} (bound {bound} nm)", fmt_time(*.time))]
    Escaped {
        time: Option<f64>,
        position: f64,
        bound: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for configuration/validation failures, as opposed to runtime ones.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid { .. } | Error::NonFinite(_) | Error::Config(_)
        )
    }
}

pub(crate) fn ensure_finite(value: f64, name: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(name))
    }
}

fn fmt_time(t: Option<f64>) -> String {
    match t {
        Some(t) => format!("{t:.6} s"),
        None => "unknown time".to_string(),
    }
}
