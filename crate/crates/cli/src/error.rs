use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const INTEGRITY: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] lungcnn::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        use lungcnn::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) => exit::USAGE,
            CliError::Data(_) | CliError::Io { .. } => exit::DATA,
            CliError::Integrity(_) => exit::INTEGRITY,
            CliError::Core(e) => match e {
                E::Config(_) => exit::USAGE,
                E::Data(_)
                | E::Decode { .. }
                | E::UnknownClassDir(_)
                | E::Label(_)
                | E::UndefinedClass { .. }
                | E::Io { .. } => exit::DATA,
                E::InvalidShape(_) | E::Shape(_) | E::NumericInput(_) => exit::INTEGRITY,
            },
        }
    }
}
