use std::io;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or inputs; exit code 2.
    #[error("{0}")]
    Validation(String),
    /// A size, attempt or I/O limit was hit; exit code 3.
    #[error("{0}")]
    Resource(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Resource(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<fiid_core::Error> for CliError {
    fn from(e: fiid_core::Error) -> Self {
        match e {
            fiid_core::Error::Resource(_) => CliError::Resource(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}
