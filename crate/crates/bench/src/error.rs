use std::path::PathBuf;

use thiserror::Error;

/// Failures of the benchmark harness, grouped by exit code.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Numeric {
        context: String,
        #[source]
        source: irregular_levy::Error,
    },

    #[error("{model}, n = {n}, replication {rep}: {source}")]
    Replication {
        model: String,
        n: usize,
        rep: usize,
        #[source]
        source: irregular_levy::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BenchError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn numeric(context: impl Into<String>, source: irregular_levy::Error) -> Self {
        Self::Numeric {
            context: context.into(),
            source,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for numeric failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric { .. } | Self::Replication { .. } => 3,
            Self::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
