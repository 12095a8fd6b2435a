//! Synthetic pressing trials against several materials, used to fit and
//! score the force estimator.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::config::{ForceDataConfig, ScenarioConfig};
use super::metrics::rmse3;
use super::HarnessError;
use crate::fuzzyforce::{ForceSample, FuzzyModel, TrainSummary};
use crate::kalman::{AxisFilters, GaussianLinearModel};
use crate::teleop::{Environment, SlavePlant};
use crate::{CartesianState, Vec3};

/// A fitted model passes when every material's test RMSE is below this
/// fraction of its force range.
pub const FORCE_RATIO_GATE: f64 = 0.05;

/// Samples discarded at the start of every trial while the tracker settles.
pub const SETTLE_SAMPLES: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct ForceTrial {
    pub material: usize,
    pub samples: Vec<ForceSample>,
}

/// Per-material score on the held-out trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaterialScore {
    pub material: String,
    pub samples: usize,
    /// Vector RMSE of the estimate against the measured force.
    pub rmse: f64,
    /// Max minus min of the measured normal force.
    pub force_range: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForceEvaluation {
    pub scores: Vec<MaterialScore>,
    pub max_ratio: f64,
}

fn environment(cfg: &ScenarioConfig, material: usize) -> Environment {
    let m = &cfg.force.materials[material];
    Environment {
        name: m.name.clone(),
        stiffness: m.stiffness,
        damping: m.damping,
        surface: m.surface,
        normal_axis: cfg.environment.normal_axis,
    }
}

/// One press: the tool starts `clearance` above the surface, pushes in to
/// depth `depth` along a `sin²` profile and returns within `duration`.
pub fn pressing_trial(
    cfg: &ScenarioConfig,
    material: usize,
    duration: f64,
    depth: f64,
    rng: &mut impl Rng,
) -> Result<ForceTrial, HarnessError> {
    let fc: &ForceDataConfig = &cfg.force;
    let env = environment(cfg, material);
    let axis = env.normal_axis;
    let mut start = Vec3::zeros();
    start[axis] = env.surface + fc.clearance;
    let mut plant = SlavePlant::new(CartesianState::at_rest(start), cfg.gains, env)?;
    plant.mass = cfg.mass;
    let model = GaussianLinearModel::constant_jerk(cfg.dt, fc.jerk_density, fc.position_noise.powi(2).max(1e-12))?;
    let mut tracker = AxisFilters::diffuse(model);
    let pos_noise = Normal::new(0.0, fc.position_noise).map_err(|e| HarnessError::Io(e.to_string()))?;
    let force_noise = Normal::new(0.0, fc.sensor_noise).map_err(|e| HarnessError::Io(e.to_string()))?;

    let travel = fc.clearance + depth;
    let w = PI / duration;
    let steps = (duration / cfg.dt).round() as usize;
    let mut samples = Vec::with_capacity(steps.saturating_sub(SETTLE_SAMPLES));
    for k in 1..=steps {
        let t = k as f64 * cfg.dt;
        let mut cmd = CartesianState::at_rest(start);
        cmd.set_axis(
            axis,
            [
                start[axis] - travel * (w * t).sin().powi(2),
                -travel * w * (2.0 * w * t).sin(),
                -2.0 * travel * w * w * (2.0 * w * t).cos(),
            ],
        );
        let (state, force) = plant.step(&cmd, cfg.dt)?;
        let measured = state.pos + Vec3::from_fn(|_, _| pos_noise.sample(rng));
        let filtered = tracker.track(&measured)?;
        if k > SETTLE_SAMPLES {
            samples.push(ForceSample {
                state: filtered,
                force: force + Vec3::from_fn(|_, _| force_noise.sample(rng)),
                label: material,
            });
        }
    }
    Ok(ForceTrial { material, samples })
}

/// `force.trials` presses per material with random durations and depths.
pub fn generate_trials(cfg: &ScenarioConfig) -> Result<Vec<ForceTrial>, HarnessError> {
    let fc = &cfg.force;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0xf0ce));
    let mut trials = Vec::with_capacity(fc.materials.len() * fc.trials);
    for material in 0..fc.materials.len() {
        for _ in 0..fc.trials {
            let duration = rng.random_range(fc.trial_duration.0..=fc.trial_duration.1);
            let depth = rng.random_range(fc.depth.0..=fc.depth.1);
            trials.push(pressing_trial(cfg, material, duration, depth, &mut rng)?);
        }
    }
    Ok(trials)
}

/// Picks `force.train_trials` random trials of each material for training;
/// the rest are held out.
pub fn split_trials(cfg: &ScenarioConfig, trials: Vec<ForceTrial>) -> (Vec<ForceTrial>, Vec<ForceTrial>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5117));
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for material in 0..cfg.force.materials.len() {
        let mut own: Vec<ForceTrial> = trials.iter().filter(|t| t.material == material).cloned().collect();
        own.shuffle(&mut rng);
        test.extend(own.split_off(cfg.force.train_trials.min(own.len())));
        train.extend(own);
    }
    (train, test)
}

pub fn train_force_model(
    cfg: &ScenarioConfig,
    train: &[ForceTrial],
) -> Result<(FuzzyModel, TrainSummary), HarnessError> {
    let samples: Vec<ForceSample> = train.iter().flat_map(|t| t.samples.iter().cloned()).collect();
    Ok(FuzzyModel::train(&samples, &cfg.force.model)?)
}

pub fn evaluate_force_model(
    cfg: &ScenarioConfig,
    model: &FuzzyModel,
    test: &[ForceTrial],
) -> Result<ForceEvaluation, HarnessError> {
    let axis = cfg.environment.normal_axis;
    let mut scores = Vec::new();
    for (material, spec) in cfg.force.materials.iter().enumerate() {
        let samples: Vec<&ForceSample> =
            test.iter().filter(|t| t.material == material).flat_map(|t| &t.samples).collect();
        let predicted = samples.iter().map(|s| model.predict_force(&s.state)).collect::<Result<Vec<_>, _>>()?;
        let measured: Vec<Vec3> = samples.iter().map(|s| s.force).collect();
        let rmse = rmse3(&predicted, &measured)?.norm;
        let (lo, hi) =
            measured.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f[axis]), hi.max(f[axis])));
        let force_range = hi - lo;
        scores.push(MaterialScore {
            material: spec.name.clone(),
            samples: samples.len(),
            rmse,
            force_range,
            ratio: rmse / force_range,
        });
    }
    let max_ratio = scores.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(ForceEvaluation { scores, max_ratio })
}
