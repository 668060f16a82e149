use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    /// A learner produced a NaN or infinite quantity.
    #[error("numeric abort: {0}")]
    Numeric(String),

    #[error(transparent)]
    Core(#[from] cba_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for numeric aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
            Self::Core(e) if e.is_numeric_abort() => 3,
            Self::Core(_) | Self::Io { .. } => 1,
        }
    }
}
