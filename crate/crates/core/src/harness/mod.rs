//! Scenario driver: configuration, the closed loop, training, metrics and
//! persisted artifacts.

mod artifacts;
mod config;
mod forcedata;
mod logs;
mod metrics;
mod pipeline;
mod scenario;
mod training;

use thiserror::Error;

pub use artifacts::{
    agents_checkpoint, agents_from_checkpoint, force_checkpoint, force_from_checkpoint, read_checkpoint,
    write_checkpoint, AGENTS_FILE, CURVE_FILE, FORCE_FILE,
};
pub use config::{
    ForceDataConfig, KeyValues, Material, ScenarioConfig, ScenarioKind, TrainingConfig, ARBITRATE_DIMS, RESTORE_DIMS,
};
pub use forcedata::{
    evaluate_force_model, generate_trials, pressing_trial, split_trials, train_force_model, ForceEvaluation,
    ForceTrial, MaterialScore, FORCE_RATIO_GATE, SETTLE_SAMPLES,
};
pub use logs::{read_curve, read_ticks, tick_header, ticks_to_string, write_curve, write_ticks, VECTOR_COLUMNS};
pub use metrics::{rmse, rmse3, Rmse3};
pub use pipeline::{arbitration_axis_state, Agents, AxisStep, Pipeline, Tick, TickRecord};
pub use scenario::{run_scenario, Gate, RunReport};
pub use training::{episode_config, new_agents, train_agents, EpisodeStats};

use crate::channel::ChannelError;
use crate::checkpoint::CheckpointError;
use crate::ddpg::DdpgError;
use crate::fuzzyforce::FuzzyError;
use crate::kalman::KalmanError;
use crate::teleop::{ArbitrationError, OperatorError, PlantError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
    #[error("length mismatch: {left} vs {right}")]
    Length { left: usize, right: usize },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("{agent} agent diverged in episode {episode} at step {step}")]
    Diverged { agent: &'static str, episode: usize, step: usize },
    #[error("checkpoint does not match the scenario: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Kalman(#[from] KalmanError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Ddpg(#[from] DdpgError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Arbitration(#[from] ArbitrationError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}
