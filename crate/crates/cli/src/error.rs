use std::process::ExitCode;

use bbmlab::bbm::BbmError;
use bbmlab::pde::PdeError;
use bbmlab::stationary::StationaryError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or model; exit 2.
    #[error("input error: {0}")]
    Input(String),
    /// A solver blew up or failed to settle; exit 3.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
        }
    }
}

impl From<PdeError> for CliError {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::Instability { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<BbmError> for CliError {
    fn from(e: BbmError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<StationaryError> for CliError {
    fn from(e: StationaryError) -> Self {
        match e {
            StationaryError::InvalidInput(_) => CliError::Input(e.to_string()),
            StationaryError::Grid(g) => g.into(),
            StationaryError::Simulation(s) => s.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
