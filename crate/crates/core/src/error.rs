use thiserror::Error;

/// Errors surfaced by model evaluation, optimization, and data loading.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("angle undefined for zero vector")]
    UndefinedAngle,

    #[error("integrand evaluated to a non-finite value at node {node}")]
    NonFiniteIntegrand { node: f64 },

    #[error("optimization diverged at iteration {iteration} (non-finite {quantity})")]
    Diverged {
        iteration: usize,
        quantity: &'static str,
    },

    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dims(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
