//! Digital twin of an IoT-controlled onion storage chamber.
//!
//! The crate simulates the closed loop end to end: discrete-time chamber
//! physics ([`env`](crate::env)), crop damage and pathogen dynamics ([`spoilage`]),
//! sensor models with noise and faults ([`sensing`]), the threshold
//! controller with hysteresis and duty limits ([`control`]), an MQTT 3.1.1
//! codec/broker/client stack ([`mqtt`]), and a deterministic scenario runner
//! with CSV logs, reports, calibration, and cost comparison ([`harness`]).
//!
//! Everything in the simulation path is a pure function over value types:
//! the same scenario file and seed reproduce byte-identical logs.

// Validation uses `!(x > 0.0)` on purpose: NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod env;
pub mod harness;
pub mod mqtt;
pub mod sensing;
pub mod spoilage;

pub use control::{Alarm, AlarmKind, ControllerConfig, ControllerState, RelayBank};
pub use env::{ActuatorInputs, AmbientProfile, ChamberParams, ChamberState};
pub use harness::{
    calibrate_rot_rate, compare, run_scenario, CalibrationOutcome, ComparisonReport, CostModel,
    HarnessError, RunOutput, RunReport, Scenario,
};
pub use sensing::{Dht22Model, FaultPlan, Mq135Model, SensorReading};
pub use spoilage::{Regime, SpoilageLedger, SpoilageRates};
