use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shift would push nonzero pixels off the grid: {0}")]
    Clipping(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("numerical degeneracy: {0}")]
    Degeneracy(String),

    #[error("similarity graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("moment {observed:.6e} is outside the attainable range [{min:.6e}, {max:.6e}]")]
    OutOfRange { observed: f64, min: f64, max: f64 },

    #[error("{0}")]
    MissingTruth(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degeneracy(msg.into())
    }

    /// True for failures caused by the data rather than by the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degeneracy(_) | Error::Disconnected { .. } | Error::OutOfRange { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
