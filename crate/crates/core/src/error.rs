use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// `max(alpha_fake, alpha_real) * (w + epsilon) < 1` does not hold, so some
    /// tag probability could leave the unit interval.
    #[error("tag probability bound violated: {which} * (w + epsilon) = {product} >= 1")]
    ConstraintViolation { which: &'static str, product: f64 },

    #[error("parameter regime check failed: {}", .0.join("; "))]
    Regime(Vec<String>),

    #[error("no sign change of the drift on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("type-2 tolerance c = {c} is infeasible; need {low} < c < {high}")]
    Infeasible { c: f64, low: f64, high: f64 },

    #[error("degenerate sensitivity: implicit-function denominator {denominator:e}")]
    DegenerateSensitivity { denominator: f64 },

    #[error("non-finite ODE state at t = {t}")]
    NonFinite { t: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
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
}

pub type Result<T> = std::result::Result<T, Error>;
