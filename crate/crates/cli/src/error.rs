use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: Box<CliError> },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn validation(msg: impl ToString) -> Self {
        CliError::Validation(msg.to_string())
    }

    pub fn solver(msg: impl ToString) -> Self {
        CliError::Solver(msg.to_string())
    }

    /// Prefixes the message, keeping the error class.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{ctx}: {m}")),
            CliError::Solver(m) => CliError::Solver(format!("{ctx}: {m}")),
            other => other,
        }
    }

    /// Process exit status: 1 validation, 2 solver, 3 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Stage { source, .. } => source.exit_code(),
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for Result<T, CliError> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Stage { stage, source: Box::new(e) })
    }
}

impl From<setaside_core::simulation::SimError> for CliError {
    fn from(e: setaside_core::simulation::SimError) -> Self {
        use setaside_core::simulation::SimError;
        match e {
            SimError::InvalidConfig(_) | SimError::Unsupported(_) => CliError::Validation(e.to_string()),
            SimError::Equilibrium { .. } | SimError::Allocation { .. } => CliError::Solver(e.to_string()),
        }
    }
}

impl From<setaside_core::econometrics::EconError> for CliError {
    fn from(e: setaside_core::econometrics::EconError) -> Self {
        use setaside_core::econometrics::EconError;
        match e {
            EconError::RankDeficient { .. } | EconError::ZeroVariance => CliError::Solver(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<setaside_core::equilibrium::EquilibriumError> for CliError {
    fn from(e: setaside_core::equilibrium::EquilibriumError) -> Self {
        use setaside_core::equilibrium::EquilibriumError;
        match e {
            EquilibriumError::InvalidModel(_) | EquilibriumError::UnsupportedConfiguration(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<setaside_core::allocation::AllocationError> for CliError {
    fn from(e: setaside_core::allocation::AllocationError) -> Self {
        use setaside_core::allocation::AllocationError;
        match e {
            AllocationError::InstanceTooLarge { .. }
            | AllocationError::SearchLimitExceeded { .. }
            | AllocationError::OracleBoundExceeded { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
