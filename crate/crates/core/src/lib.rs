//! Deterministic simulator of a CanSat onboard computer, its 433 MHz
//! telemetry downlink and the ground station that receives it.
//!
//! The math modules are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, with `*F32` variants where useful.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atmos;
pub mod config;
pub mod ground;
pub mod mission;
pub mod nmea;
pub mod obc;
pub mod power;
pub mod radio;
pub mod rng;
pub mod scalar;
pub mod sensors;
pub mod telemetry;

pub use scalar::Real;

pub use config::{ConfigError, MissionConfig};
pub use ground::{GroundState, MissionSummary};
pub use mission::{run_mission, simulate, MissionError, MissionOutput};
pub use obc::{FlightPhase, Obc, TelemetryRecord};
pub use sensors::{CalibrationState, RawSensorFrame, SensorNoiseConfig};
pub use telemetry::{DecodeStats, DecodedFrame, StreamDecoder, FRAME_LEN};

pub type FlightProfile = atmos::FlightProfile<f64>;
pub type FlightProfileF32 = atmos::FlightProfile<f32>;
pub type EnvironmentState = atmos::EnvironmentState<f64>;
pub type EnvironmentStateF32 = atmos::EnvironmentState<f32>;
pub type Attitude = sensors::Attitude<f64>;
pub type LinkConfig = radio::LinkConfig<f64>;
pub type LinkConfigF32 = radio::LinkConfig<f32>;
pub type LinkReport = radio::LinkReport<f64>;
pub type PowerComponent = power::PowerComponent<f64>;
pub type Battery = power::Battery<f64>;
pub type PowerBudget = power::PowerBudget<f64>;
