use polyridge::RidgeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Io(String),

    /// The reader of our output went away; not worth a message.
    #[error("broken pipe")]
    BrokenPipe,

    #[error("invalid model file: {0}")]
    Model(String),

    #[error(transparent)]
    Ridge(#[from] RidgeError),
}

impl CliError {
    /// Usage, data and I/O problems all exit with 1; solver failure (exit 2)
    /// is reported through the fit status, not as an error.
    pub fn exit_code(&self) -> i32 {
        1
    }
}
