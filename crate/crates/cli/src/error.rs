use std::path::Path;

use anodiff_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{failed} of {total} benchmark cells failed")]
    PartialBench { failed: usize, total: usize },
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        AppError::Format {
            path: path.display().to_string(),
            msg: msg.into(),
        }
    }

    /// 0 ok, 1 partial bench failure, 2 usage/config, 3 I/O and file
    /// formats, 4 numeric, 5 contract.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::PartialBench { .. } => 1,
            AppError::Usage(_) | AppError::Config(_) => 2,
            AppError::Io { .. } | AppError::Format { .. } => 3,
            AppError::Core(e) => match e {
                CoreError::Config(_) => 2,
                CoreError::Numeric(_) => 4,
                _ => 5,
            },
        }
    }
}
