use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension { what: &'static str, expected: usize, got: usize },

    #[error("matrix is singular (zero pivot in column {column})")]
    Singular { column: usize },

    #[error("GMRES stagnated after {iterations} iterations (relative residual {relative_residual:e})")]
    GmresStagnation { iterations: usize, relative_residual: f64, history: Vec<f64> },

    #[error("Newton failed to converge in {iterations} iterations (last residual {last:e})")]
    NewtonDivergence { iterations: usize, last: f64, history: Vec<f64> },

    #[error("network produced a non-finite value on patch {patch_id}")]
    NonFinitePrediction { patch_id: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension { what, expected, got }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
