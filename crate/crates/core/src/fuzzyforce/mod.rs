//! Master-side estimate of the slave/environment contact force.
//!
//! Features of the filtered slave state are z-scored and projected onto
//! discriminant directions that separate the training materials. Rules come
//! from subtractive clustering refined by fuzzy c-means, each with a linear
//! consequent fitted by recursive least squares. At run time the interval
//! type-2 firing strengths are type-reduced and blend the rule outputs.

mod cluster;
mod model;
mod preprocess;
mod wrls;

use thiserror::Error;

pub use cluster::{fcm, fcm_objective, memberships, subtractive_clustering, FcmParams, FcmResult, SubtractiveParams};
pub use model::{ForceSample, FuzzyConfig, FuzzyModel, StateFeatures, TrainSummary};
pub use preprocess::{PreprocessModel, SCATTER_RIDGE};
pub use wrls::{augment, wrls_update, FuzzyRule, DEFAULT_S0};

use crate::checkpoint::CheckpointError;

#[derive(Debug, Error, PartialEq)]
pub enum FuzzyError {
    #[error("no training data")]
    EmptyData,
    #[error("{0}")]
    Invalid(String),
    #[error("feature {feature} has zero variance")]
    ZeroVariance { feature: usize },
    #[error("within-class scatter is singular even after regularization")]
    SingularScatter,
    #[error("{clusters} clusters requested for {points} points")]
    TooManyClusters { clusters: usize, points: usize },
    #[error("non-finite value")]
    NonFinite,
    #[error("input fires no rule")]
    OutOfDomain,
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}
