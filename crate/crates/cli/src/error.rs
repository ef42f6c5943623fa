use thiserror::Error;

/// Failures surfaced to the shell. Usage problems exit 2, everything else 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] mbqc_core::Error),
    #[error("cannot read {path}: {source}")]
    Input {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write output: {0}")]
    Output(std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use mbqc_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Input { .. } => 2,
            CliError::Core(
                E::InvalidArgument(_) | E::Capacity(_) | E::NotApplicable(_) | E::Json(_),
            ) => 2,
            CliError::Core(E::Io(_)) | CliError::Output(_) | CliError::Internal(_) => 1,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub type CliResult<T> = std::result::Result<T, CliError>;
