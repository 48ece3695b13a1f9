use std::path::PathBuf;

use thiserror::Error;

use crate::model::PccId;

/// Errors raised while constructing or using a feeder model.
#[derive(Debug, Error)]
pub enum FeederError {
    #[error("feeder is not radial: {0}")]
    NonRadial(String),
    #[error("invalid feeder: {0}")]
    Invalid(String),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no node at bus {bus} on phase {phase}")]
    UnknownNode { bus: usize, phase: u8 },
    #[error("baseline flows already violate grid limits")]
    BaselineViolating,
}

/// Errors raised while reading, validating or writing a scenario.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("household {household}: invalid {field}: {message}")]
    Household {
        household: u32,
        field: String,
        message: String,
    },
    #[error("invalid scenario {field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Feeder(#[from] FeederError),
}

impl ScenarioError {
    pub(crate) fn household(household: u32, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Household {
            household,
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Errors raised by the per-agent response computations.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ResponseError {
    /// The battery-feasible grid flows `[battery_lo, battery_hi]` do not meet
    /// the contracted box `[-x_bar, x_bar]`.
    #[error("household {household}: battery range [{battery_lo}, {battery_hi}] misses the contracted limit ±{x_bar}")]
    ContractClash {
        household: u32,
        battery_lo: f64,
        battery_hi: f64,
        x_bar: f64,
    },
}

/// Errors raised by the coordinator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoordinatorError {
    #[error("constraint set is not attainable at {pcc} (margin {margin})")]
    NotAttainable { pcc: PccId, margin: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no agents")]
    NoAgents,
}

/// Top-level error for the simulation driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Feeder(#[from] FeederError),
    #[error(transparent)]
    Coordinator(#[from] CoordinatorError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
