use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid array kind: {0}")]
    InvalidKind(String),

    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("phase constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("precondition not met: {0}")]
    InvalidPrecondition(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid experiment at `{path}`: {message}")]
    InvalidExperiment { path: String, message: String },
}

impl Error {
    pub(crate) fn experiment(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidExperiment { path: path.into(), message: message.into() }
    }

    /// True for failures that come from numerical routines rather than
    /// from rejected inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
