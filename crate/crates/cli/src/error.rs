use magclimb::dsp::DspError;
use magclimb::dynamics::{DynamicsError, FrameError};
use magclimb::experiment::ExperimentError;
use magclimb::models::ModelError;
use magclimb::quality::QualityError;
use thiserror::Error;

/// Failures grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("training failed: {0}")]
    Training(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Simulation(_) => 3,
            CliError::Training(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Simulation(e.to_string())
    }
}

impl From<DspError> for CliError {
    fn from(e: DspError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<FrameError> for CliError {
    fn from(e: FrameError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<QualityError> for CliError {
    fn from(e: QualityError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) | ModelError::Io(_) | ModelError::Empty(_) => CliError::Input(e.to_string()),
            ModelError::NonFinite { .. } | ModelError::Neural(_) => CliError::Training(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Plan(_) | ExperimentError::OutOfProtocol(_) | ExperimentError::Dsp(_) => CliError::Input(e.to_string()),
            ExperimentError::Simulation(_) | ExperimentError::Quality(_) => CliError::Simulation(e.to_string()),
            ExperimentError::Model(m) => m.into(),
        }
    }
}
