use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Failures surfaced by the command line, each tagged with the stage that
/// produced it. Usage and input problems exit with 1, numeric failures in the
/// pipeline with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {message}")]
    Usage { stage: &'static str, message: String },

    #[error("{stage}: {}: {source}", path.display())]
    Io {
        stage: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Numeric {
        stage: &'static str,
        #[source]
        source: synthforge::Error,
    },
}

impl CliError {
    pub fn usage(stage: &'static str, message: impl Into<String>) -> Self {
        CliError::Usage {
            stage,
            message: message.into(),
        }
    }

    pub fn io(stage: &'static str, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            stage,
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } | CliError::Io { .. } => 1,
            CliError::Numeric { .. } => 2,
        }
    }
}

pub(crate) trait NumericContext<T> {
    fn numeric(self, stage: &'static str) -> Result<T>;
}

impl<T> NumericContext<T> for std::result::Result<T, synthforge::Error> {
    fn numeric(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Numeric { stage, source })
    }
}
