use std::fmt::Display;

use delayminer_core::bps_model::ModelError;
use delayminer_core::optimizer::OptimizeError;
use delayminer_core::simulator::SimulationError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{stage}: {message}")]
    Validation {
        stage: &'static str,
        message: String,
    },
    #[error("{stage}: {message}")]
    Runtime {
        stage: &'static str,
        message: String,
    },
}

impl CliError {
    pub fn validation(stage: &'static str, err: impl Display) -> Self {
        Self::Validation {
            stage,
            message: err.to_string(),
        }
    }

    pub fn runtime(stage: &'static str, err: impl Display) -> Self {
        Self::Runtime {
            stage,
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Validation { .. } => EXIT_VALIDATION,
            Self::Runtime { .. } => EXIT_RUNTIME,
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            Self::Usage(_) => "arguments",
            Self::Validation { stage, .. } | Self::Runtime { stage, .. } => stage,
        }
    }

    pub fn from_simulation(stage: &'static str, err: SimulationError) -> Self {
        match err {
            SimulationError::Model(_) | SimulationError::Config(_) => Self::validation(stage, err),
            SimulationError::Deadlock { .. } | SimulationError::EventBudget(_) => {
                Self::runtime(stage, err)
            }
        }
    }

    pub fn from_model(stage: &'static str, err: ModelError) -> Self {
        Self::validation(stage, err)
    }

    pub fn from_optimize(stage: &'static str, err: OptimizeError) -> Self {
        match err {
            OptimizeError::AllTrialsFailed(..) | OptimizeError::Metric(_) => {
                Self::runtime(stage, err)
            }
            _ => Self::validation(stage, err),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
