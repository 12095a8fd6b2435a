//! Simulated multi-pilot collaborative teleoperation.
//!
//! Two master operators are fused by a Kalman filter, the fused command
//! crosses a delayed channel, a DDPG agent restores it, a second agent
//! blends it with a slave-side co-pilot, and a PID-driven point plant
//! executes the result against a compliant environment. An interval
//! type-2 Takagi–Sugeno model estimates the contact force on the master
//! side from the filtered slave state.

// Negated float comparisons are how the validators reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod checkpoint;
pub mod ddpg;
pub mod fuzzyforce;
pub mod harness;
pub mod kalman;
pub mod state;
pub mod teleop;

pub use state::{CartesianState, Vec3};
