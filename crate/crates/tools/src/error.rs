use std::path::PathBuf;

/// Errors from file IO, parsing, spec validation and the numerics.
#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error(transparent)]
    Core(#[from] smoothent::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{origin}:{line}: {msg}")]
    Parse { origin: String, line: usize, msg: String },

    /// Bad or missing configuration; maps to a usage exit code.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ToolError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ToolError::Io { path: path.into(), source }
    }

    pub fn parse(origin: &str, line: usize, msg: impl Into<String>) -> Self {
        ToolError::Parse { origin: origin.to_string(), line, msg: msg.into() }
    }

    /// Process exit status: 2 for usage problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ToolError>;

macro_rules! usage {
    ($($arg:tt)*) => {
        $crate::error::ToolError::Usage(format!($($arg)*))
    };
}
pub(crate) use usage;
