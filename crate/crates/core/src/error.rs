use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("training diverged in layer {layer}: {detail}")]
    TrainingDiverged { layer: usize, detail: String },

    #[error("gradient check failed: {0}")]
    GradientCheck(String),

    #[error("model is frozen; parameters cannot be modified")]
    FrozenModel,

    #[error("relative improvement undefined for baseline value {0}")]
    UndefinedBaseline(f64),

    #[error("missing artifact from stage `{stage}`: {path} (run `{stage}` first)")]
    MissingStage { stage: &'static str, path: PathBuf },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 1 usage/config, 2 data, 3 training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::InvalidInput(_)
            | Error::InvalidProfile(_)
            | Error::Parse { .. }
            | Error::UndefinedBaseline(_)
            | Error::MissingStage { .. }
            | Error::Io { .. }
            | Error::Json(_) => 2,
            Error::TrainingDiverged { .. } | Error::GradientCheck(_) | Error::FrozenModel => 3,
        }
    }
}
