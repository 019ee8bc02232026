use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("{path}: unsupported channel count {channels} (expected 1 or 3)")]
    UnsupportedChannels { path: PathBuf, channels: u8 },

    #[error("{path}: unsupported pixel format, expected {expected}")]
    UnsupportedFormat { path: PathBuf, expected: &'static str },

    #[error("{path}: corrupt or undecodable image: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("depth map is not dense")]
    NonDenseDepth,

    #[error("depth map has no valid pixels")]
    NoValidDepth,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Short machine-readable tag for the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotFound(_) => "not_found",
            Error::UnsupportedChannels { .. } => "unsupported_channels",
            Error::UnsupportedFormat { .. } => "unsupported_format",
            Error::Decode { .. } => "decode",
            Error::Io { .. } => "io",
            Error::SizeMismatch(_) => "size_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NonDenseDepth => "non_dense_depth",
            Error::NoValidDepth => "no_valid_depth",
            Error::Empty(_) => "empty",
            Error::Config(_) => "config",
            Error::Json { .. } => "json",
        }
    }
}

pub(crate) fn check_size(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::SizeMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}
