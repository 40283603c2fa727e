//! Decentralized adaptive control of a rigid payload carried by a team of
//! agents, with a deterministic SE(3) simulator.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod checks;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod metrics;
pub mod regressors;
pub mod scenarios;
pub mod sim;
pub mod so3;
pub mod telemetry;
pub mod tracking;

pub use config::{MeasurementModel, Scenario, ScenarioConfig};
pub use controller::{AgentState, Controller, Estimates, GainConfig, Regularizer};
pub use dynamics::{Accel, BodyParams, FrictionMode, FrictionParams, Mat6, Pose, Twist, Vec6, Wrench};
pub use error::{Error, Result};
pub use sim::{run, run_config, run_to_failure, SimRecord};
pub use so3::{Mat3, RotationMatrix, Vec3};
pub use tracking::{DesiredState, TrajectorySpec};
