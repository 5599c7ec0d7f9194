use thiserror::Error;

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<mlfeedback::Error> for CliError {
    fn from(e: mlfeedback::Error) -> Self {
        use mlfeedback::Error as E;
        match e {
            E::Domain { .. } | E::Config(_) => CliError::Config(e.to_string()),
            E::TooFewRecords { .. } | E::NoConvergence { .. } | E::Data(_) => CliError::Numerical(e.to_string()),
        }
    }
}
