use std::path::PathBuf;

use crate::scenario::ScenarioError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("policy {policy} failed in replication {replication} at period {period}: {source}")]
    Policy {
        policy: String,
        replication: u64,
        period: u64,
        #[source]
        source: pmnl_core::Error,
    },
    #[error(transparent)]
    Model(#[from] pmnl_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for problems with the inputs rather than with a run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Scenario(_) | Error::Config(_) | Error::Parse { .. }
        ) || matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
