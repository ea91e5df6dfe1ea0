use thiserror::Error;

/// Errors raised by the library. Most are contract violations on shapes or
/// ranges; the rest come from iterative runs and file parsing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch { context: &'static str, expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a probability vector: {0}")]
    InvalidLaw(String),

    #[error("non-finite value at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("diverged at iteration {iteration}: F = {value} exceeds F(theta_0) + {margin}")]
    Diverged { iteration: usize, value: f64, margin: f64 },

    #[error("enumerating {components} mixture components exceeds the 2^20 limit")]
    EnumerationLimit { components: f64 },

    #[error("point lies within 1e-9 of hyperplane {hyperplane}")]
    OnHyperplane { hyperplane: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, got })
    }
}
