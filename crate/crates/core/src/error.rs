use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A tensor or image had the wrong geometry for the operation.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A configuration value is out of range or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data failed a content check (non-binary mask, bad manifest entry, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("schedule error: epoch {epoch} is outside 0..{epochs}")]
    Schedule { epoch: usize, epochs: usize },

    /// Checkpoint format/version/config mismatch.
    #[error("version error: {0}")]
    Version(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("tensor error: {0}")]
    Tensor(#[from] candle_core::Error),
}

impl Error {
    pub fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefixes a dimension error with the location it was raised at.
    pub fn at(self, location: impl std::fmt::Display) -> Self {
        match self {
            Error::Dimension(m) => Error::Dimension(format!("{location}: {m}")),
            other => other,
        }
    }

    /// Stable, machine-parsable class name used by the CLI's error line.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::Schedule { .. } => "schedule",
            Error::Version(_) => "version",
            Error::Generation(_) => "generation",
            Error::Io { .. } => "io",
            Error::Image { .. } => "image",
            Error::Parse(_) => "parse",
            Error::Tensor(_) => "tensor",
        }
    }
}
