use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no Nehari projection exists: the positive part of u vanishes")]
    NoProjection,

    #[error("no seed converged ({seeds} tried); best gradient norm {best_grad_norm:.3e} after {iters} iterations")]
    Convergence {
        seeds: usize,
        best_grad_norm: f64,
        iters: usize,
    },

    #[error("concentration function does not decay at the search-box boundary: max |H| = {boundary:.3e} vs |H(x0)| = {minimum:.3e}; enlarge the box")]
    DecayCheck { boundary: f64, minimum: f64 },

    #[error("eps sweep failed at eps = {eps}: {source}")]
    Sweep {
        eps: f64,
        #[source]
        source: Box<Error>,
        partial: Box<crate::concentration::SweepReport>,
    },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("cannot parse {path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Shape(_) => "shape",
            Error::NoProjection => "no-projection",
            Error::Convergence { .. } => "convergence",
            Error::DecayCheck { .. } => "decay-check",
            Error::Sweep { .. } => "sweep",
            Error::Validation { .. } => "validation",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
