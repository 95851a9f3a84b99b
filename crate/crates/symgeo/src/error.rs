use std::process::ExitCode;

/// Failure of a command. Each variant maps to one stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Missing, unparsable or invalid configuration, bad flags or an
    /// unwritable output. Exit code 2.
    #[error("{0}")]
    Config(String),
    /// The configuration loaded but at least one certificate failed. Exit
    /// code 1.
    #[error("certificate check failed: {0}")]
    Certificate(String),
    /// The integrator produced a non-finite value or left the domain. Exit
    /// code 3.
    #[error("numeric abort at step {step}: {detail}")]
    Numeric { step: u64, detail: String },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Certificate(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric { .. } => 3,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    /// Map an integrator error raised during step `step`.
    pub fn from_step(step: u64, e: symgeo_core::Error) -> Self {
        use symgeo_core::Error as E;
        match e {
            E::NonFinite { step, .. } | E::DomainViolation { step, .. } => CliError::Numeric {
                step: step as u64,
                detail: e.to_string(),
            },
            other => CliError::Numeric {
                step,
                detail: other.to_string(),
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv output error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
