//! Scenario runner: wires the chamber, spoilage, sensing, control, and
//! telemetry modules into a timed loop and reports the outcome.

pub mod calibrate;
pub mod report;
pub mod runner;
pub mod scenario;

use thiserror::Error;

pub use calibrate::{calibrate_rot_rate, CalibrationOutcome};
pub use report::{compare, ActuatorStats, ComparisonReport, CostModel, RunReport, StorageOption};
pub use runner::{run_scenario, RunOutput, CSV_HEADER};
pub use scenario::{
    AmbientSpec, InitialState, Scenario, SensorsSpec, SpoilageParams, TelemetrySpec,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("scenario file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    Spoilage(#[from] crate::spoilage::SpoilageError),
    #[error(transparent)]
    Sensing(#[from] crate::sensing::SensingError),
    #[error(transparent)]
    Control(#[from] crate::control::ControlError),
    #[error("telemetry: {0}")]
    Telemetry(#[from] crate::mqtt::ClientError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("comparison requires same-duration runs ({baseline_s} s vs {controlled_s} s)")]
    DurationMismatch { baseline_s: f64, controlled_s: f64 },
    #[error("calibration: {0}")]
    CalibrationUnreachable(String),
}

impl HarnessError {
    /// True for errors a user fixes by editing inputs (CLI exit code 1);
    /// everything else is a runtime failure (exit code 2).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HarnessError::Scenario(_)
                | HarnessError::Toml(_)
                | HarnessError::Sensing(_)
                | HarnessError::DurationMismatch { .. }
        )
    }
}
