use std::path::PathBuf;

use rhombot_core::{EngineError, KinematicsError, LoopError, TopologyError};
use thiserror::Error;

/// Process exit codes. Stable contract for scripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Usage = 1,
    Validation = 2,
    Partial = 3,
    Internal = 4,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Semantic { field: String, message: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("measurement row {row}: {message}")]
    Measurement { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
    #[error("script stopped at op {index}: {source}")]
    Partial {
        index: usize,
        #[source]
        source: EngineError,
    },
}

impl Error {
    pub fn semantic(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Semantic {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Builds a syntax error from a byte offset into `text`.
    pub fn syntax_at(text: &str, offset: usize, message: impl Into<String>) -> Self {
        let before = &text[..offset.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Error::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Error::Usage(_) => ExitCode::Usage,
            Error::Syntax { .. }
            | Error::Semantic { .. }
            | Error::Topology(_)
            | Error::Kinematics(_)
            | Error::Loop(_)
            | Error::Engine(_)
            | Error::Measurement { .. }
            | Error::Csv(_) => ExitCode::Validation,
            Error::Partial { .. } => ExitCode::Partial,
            Error::Io { .. } | Error::Json(_) => ExitCode::Internal,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
