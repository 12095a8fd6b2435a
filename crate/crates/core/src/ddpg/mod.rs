//! Deep deterministic policy gradient, written from scratch.
//!
//! Two instances drive the framework: one restores the delayed master
//! command, the other allocates arbitration weights between the master and
//! the co-pilot. Networks are tiny (tens of parameters) so everything runs
//! on plain `Vec<f64>` buffers.

mod agent;
mod mlp;
mod replay;

pub use agent::{DdpgAgent, DdpgConfig, OptimizerKind, TrainStats};
pub use mlp::{Dense, HiddenActivation, Mlp, MlpGrad, OutputActivation, Trace};
pub use replay::{ReplayBuffer, Transition};

use thiserror::Error;

use crate::checkpoint::CheckpointError;

#[derive(Debug, Error, PartialEq)]
pub enum DdpgError {
    #[error("{what} has dimension {got}, expected {expected}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,
    #[error("cannot train on an empty batch")]
    EmptyBatch,
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("training diverged: non-finite network weight")]
    Diverged,
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}
