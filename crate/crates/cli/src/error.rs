use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Library(#[from] wkserver::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for bad input, 3 for failures that indicate a bug or a broken
    /// numerical assumption.
    pub fn exit_code(&self) -> u8 {
        use wkserver::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Library(E::Internal(_) | E::Singular { .. } | E::NotConverged { .. }) => 3,
            CliError::Library(_) => 1,
        }
    }
}
