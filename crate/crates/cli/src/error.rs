use std::path::PathBuf;

/// Failure of a scenario run, grouped by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: chainsim_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        RunError::Config { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Numerical { .. } => 3,
            RunError::Io { .. } => 4,
        }
    }
}

/// Attach scenario context to core errors.
pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, RunError>;
}

impl<T> Context<T> for chainsim_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, RunError> {
        self.map_err(|source| RunError::Numerical { context: what(), source })
    }
}
