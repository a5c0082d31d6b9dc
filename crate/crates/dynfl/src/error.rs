use std::path::PathBuf;

use thiserror::Error;

use dynfl_core::baselines::BaselineError;
use dynfl_core::engine::EngineError;
use dynfl_core::instance::InstanceError;
use dynfl_core::verify::VerifyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: no points")]
    EmptyInput { path: PathBuf },
    #[error("{path}, line {line}: expected {expected} fields, got {got}")]
    RaggedRow { path: PathBuf, line: usize, expected: usize, got: usize },
    #[error("{path}, line {line}: {detail}")]
    BadField { path: PathBuf, line: usize, detail: String },
    #[error("{0}")]
    Config(String),
    #[error("verification failed after update {update}: {detail}")]
    AuditFailure { update: usize, detail: String },
    #[error("record lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

impl HarnessError {
    /// CLI exit code: 2 for verification failures, 3 for input problems,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::AuditFailure { .. } => 2,
            HarnessError::Io { .. }
            | HarnessError::EmptyInput { .. }
            | HarnessError::RaggedRow { .. }
            | HarnessError::BadField { .. }
            | HarnessError::Config(_)
            | HarnessError::LengthMismatch { .. } => 3,
            _ => 1,
        }
    }
}
