use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const DIVERGED: i32 = 4;
    pub const ORACLE: i32 = 5;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("run diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("oracle failure: {}", subjects.join(", "))]
    OracleFailed { subjects: Vec<String> },

    #[error(transparent)]
    Core(#[from] platon_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Error {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Short label printed in front of the message.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Usage(_) | Error::Io { .. } | Error::Format { .. } => "usage",
            Error::Config(_) | Error::Core(_) => "config",
            Error::Diverged { .. } => "divergence",
            Error::OracleFailed { .. } => "oracle",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            "usage" => exit::USAGE,
            "config" => exit::CONFIG,
            "divergence" => exit::DIVERGED,
            _ => exit::ORACLE,
        }
    }
}
