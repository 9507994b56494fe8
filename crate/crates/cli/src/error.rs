use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("numerical invariant violated: {0}")]
    Invariant(String),

    #[error("{0}")]
    Physics(trps_core::Error),

    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { path: path.into(), message: message.into() }
    }

    /// Process exit code: 2 config, 3 numerical invariant, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Invariant(_) => 3,
            CliError::Physics(trps_core::Error::Invariant(_)) => 3,
            CliError::Physics(trps_core::Error::Frequency { source, .. })
                if matches!(**source, trps_core::Error::Invariant(_)) =>
            {
                3
            }
            CliError::Physics(_) => 2,
            CliError::Io(_) => 4,
        }
    }
}

impl From<trps_core::Error> for CliError {
    fn from(e: trps_core::Error) -> Self {
        CliError::Physics(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
