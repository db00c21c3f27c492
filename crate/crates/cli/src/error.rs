use rotorflow::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("solver failed: {0}")]
    Solve(CoreError),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 1,
            CliError::Solve(_) => 2,
            CliError::Verify(_) => 3,
        }
    }

    /// Sort a core error into a configuration problem or a solver failure.
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::NotConverged { .. }
            | CoreError::BlowUp { .. }
            | CoreError::NotBracketed { .. }
            | CoreError::MatchNotConverged { .. }
            | CoreError::NonFinite { .. }
            | CoreError::TailDivergence { .. } => CliError::Solve(e),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}
