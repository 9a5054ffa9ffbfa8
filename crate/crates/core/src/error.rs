use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("elements live in different algebras: {0}")]
    AlgebraMismatch(String),
    #[error("window too small: {0}")]
    Window(String),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("level mismatch: {0}")]
    LevelMismatch(String),
    #[error("unsupported candidate: {0}")]
    UnsupportedCandidate(String),
    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerics { message: String, residual: f64 },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// Stable machine-readable name, used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "DimensionError",
            Error::AlgebraMismatch(_) => "AlgebraMismatch",
            Error::Window(_) => "WindowError",
            Error::Domain(_) => "DomainError",
            Error::Config(_) => "ConfigError",
            Error::Shape(_) => "ShapeError",
            Error::LevelMismatch(_) => "LevelMismatch",
            Error::UnsupportedCandidate(_) => "UnsupportedCandidate",
            Error::Numerics { .. } => "NumericsError",
            Error::Internal(_) => "InternalError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
