use pipbc_core::Error;

/// Failures of a command, each with a fixed process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("not converged: {0}")]
    Convergence(String),
    #[error("numerical blow-up at t = {time}; last state {state:?}")]
    BlowUp { time: f64, state: Vec<f64> },
}

impl CliError {
    /// 0 success, 1 certification or convergence failure, 2 usage or
    /// config error, 3 numerical blow-up.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Certification(_) | Self::Convergence(_) => 1,
            Self::Config(_) | Self::Io(_) => 2,
            Self::BlowUp { .. } => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BlowUp { time, last_state } => Self::BlowUp {
                time,
                state: last_state,
            },
            Error::NotHurwitz(_) | Error::NoDiagonalCertificate => Self::Certification(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}
