//! Scenario configuration: a flat `key = value` file with dotted keys.
//!
//! ```text
//! # comment
//! scenario = triple-pilot-delay
//! channel.delay = 0.5
//! operator.master1.error.0 = bias 3 7 0.05 0.04 0
//! ```

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::channel::ChannelConfig;
use crate::ddpg::{DdpgConfig, OptimizerKind};
use crate::fuzzyforce::{FuzzyConfig, StateFeatures, SubtractiveParams};
use crate::kalman::{GaussianLinearModel, DEFAULT_MEASUREMENT_VAR};
use crate::teleop::{
    CircleReference, Environment, ErrorShape, ErrorWindow, OperatorProfile, PidGains, MASTER_ORIENTED_MAX,
};
use crate::Vec3;

/// Per-axis restoration agent: (velocity, acceleration) in, (position, velocity) offsets out.
pub const RESTORE_DIMS: (usize, usize) = (2, 2);
/// Per-axis arbitration agent: (master error, co-pilot error) in, weight out.
pub const ARBITRATE_DIMS: (usize, usize) = (2, 1);

/// Parsed key/value pairs that remember which keys were read.
#[derive(Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
    read: RefCell<BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(HarnessError::Config { line: i + 1, msg: format!("expected `key = value`, got `{line}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(HarnessError::Config { line: i + 1, msg: format!("bad key `{k}`") });
            }
            if entries.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
                return Err(HarnessError::Config { line: i + 1, msg: format!("duplicate key `{k}`") });
            }
        }
        Ok(Self { entries, read: RefCell::default() })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.read.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn err(&self, key: &str, msg: impl std::fmt::Display) -> HarnessError {
        let line = self.entries.get(key).map_or(0, |(l, _)| *l);
        HarnessError::Config { line, msg: format!("{key}: {msg}") }
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| self.err(key, e)),
        }
    }

    pub fn floats(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, HarnessError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v.split_whitespace().map(|t| t.parse().map_err(|e| self.err(key, e))).collect(),
        }
    }

    pub fn vec3(&self, key: &str, default: Vec3) -> Result<Vec3, HarnessError> {
        let v = self.floats(key, default.as_slice())?;
        if v.len() != 3 {
            return Err(self.err(key, "expected three numbers"));
        }
        Ok(Vec3::new(v[0], v[1], v[2]))
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool, HarnessError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "on" | "yes" | "1") => Ok(true),
            Some("false" | "off" | "no" | "0") => Ok(false),
            Some(v) => Err(self.err(key, format!("`{v}` is not a boolean"))),
        }
    }

    /// Keys of the form `prefix.<suffix>`, with the suffixes in key order.
    pub fn keys_under(&self, prefix: &str) -> Vec<String> {
        let p = format!("{prefix}.");
        self.entries.keys().filter_map(|k| k.strip_prefix(&p).map(str::to_string)).collect()
    }

    /// Fails on keys nobody asked for, which are almost always typos.
    pub fn finish(&self) -> Result<(), HarnessError> {
        let read = self.read.borrow();
        match self.entries.keys().find(|k| !read.contains(*k)) {
            Some(k) => Err(self.err(k, "unknown key")),
            None => Ok(()),
        }
    }

    /// Sorted `key = value` lines, used for hashing.
    pub fn canonical_text(&self) -> String {
        self.entries.iter().map(|(k, (_, v))| format!("{k} = {v}\n")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    DualPilot,
    TriplePilotDelay,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DualPilot => "dual-pilot",
            Self::TriplePilotDelay => "triple-pilot-delay",
        }
    }

    pub fn masters(&self) -> usize {
        match self {
            Self::DualPilot => 1,
            Self::TriplePilotDelay => 2,
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dual-pilot" => Ok(Self::DualPilot),
            "triple-pilot-delay" => Ok(Self::TriplePilotDelay),
            other => Err(format!("unknown scenario `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub episodes: usize,
    pub steps: usize,
    /// Episode circles draw their radius uniformly from this range.
    pub radius_range: (f64, f64),
    /// Largest per-axis bias of a randomly placed operator error.
    pub error_magnitude: f64,
    /// Length of each random error window, in seconds.
    pub error_duration: f64,
    /// Score each agent greedily on a fixed held-out episode after every
    /// training episode and keep its best-scoring snapshot.
    pub keep_best: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    pub name: String,
    pub stiffness: f64,
    pub damping: f64,
    pub surface: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForceDataConfig {
    pub materials: Vec<Material>,
    pub trials: usize,
    pub train_trials: usize,
    pub trial_duration: (f64, f64),
    /// Commanded press depth below the surface.
    pub depth: (f64, f64),
    /// Trials start this far above the surface.
    pub clearance: f64,
    pub position_noise: f64,
    pub sensor_noise: f64,
    /// Jerk density of the filter that tracks the measured slave position.
    pub jerk_density: f64,
    pub model: FuzzyConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub dt: f64,
    pub steps: usize,
    pub reference: CircleReference,
    pub kalman: GaussianLinearModel,
    pub channel: ChannelConfig,
    pub masters: Vec<OperatorProfile>,
    pub copilot: OperatorProfile,
    pub restoration: bool,
    pub restoration_scale: f64,
    pub arbitration_scale: f64,
    pub weight_bounds: (f64, f64),
    /// `W_m` used when no arbitration agent is loaded.
    pub fixed_weight: f64,
    pub restore_agent: DdpgConfig,
    pub arbitrate_agent: DdpgConfig,
    pub gains: PidGains,
    pub mass: f64,
    pub environment: Environment,
    pub training: TrainingConfig,
    pub force: ForceDataConfig,
    /// SHA-256 of the canonical key/value text.
    pub hash: String,
}

fn pair(v: Vec<f64>, kv: &KeyValues, key: &str) -> Result<(f64, f64), HarnessError> {
    if v.len() != 2 || v[0] > v[1] {
        return Err(kv.err(key, "expected `min max`"));
    }
    Ok((v[0], v[1]))
}

fn parse_window(kv: &KeyValues, key: &str, spec: &str) -> Result<ErrorWindow, HarnessError> {
    let parts: Vec<&str> = spec.split_whitespace().collect();
    let nums: Result<Vec<f64>, _> = parts.iter().skip(1).map(|t| t.parse::<f64>()).collect();
    let nums = nums.map_err(|e| kv.err(key, e))?;
    if nums.len() != 5 {
        return Err(kv.err(key, "expected `bias|drift start end x y z`"));
    }
    let v = Vec3::new(nums[2], nums[3], nums[4]);
    let shape = match parts[0] {
        "bias" => ErrorShape::Bias(v),
        "drift" => ErrorShape::Drift(v),
        other => return Err(kv.err(key, format!("unknown error shape `{other}`"))),
    };
    Ok(ErrorWindow { start: nums[0], end: nums[1], shape })
}

fn operator(
    kv: &KeyValues,
    name: &str,
    reference: &CircleReference,
    seed: u64,
) -> Result<OperatorProfile, HarnessError> {
    let base = format!("operator.{name}");
    let mut windows = Vec::new();
    for suffix in kv.keys_under(&format!("{base}.error")) {
        let key = format!("{base}.error.{suffix}");
        let spec = kv.raw(&key).unwrap().to_string();
        windows.push(parse_window(kv, &key, &spec)?);
    }
    let profile = OperatorProfile {
        reference: reference.clone(),
        noise_std: kv.get(&format!("{base}.noise"), 5e-4)?,
        windows,
        seed: kv.get(&format!("{base}.seed"), seed)?,
    };
    profile.validate().map_err(|e| kv.err(&base, e))?;
    Ok(profile)
}

fn agent(
    kv: &KeyValues,
    name: &str,
    dims: (usize, usize),
    action: (f64, f64),
    seed: u64,
) -> Result<DdpgConfig, HarnessError> {
    let d = DdpgConfig::default();
    let get = |field: &str, default: f64| -> Result<f64, HarnessError> {
        let shared = kv.get(&format!("agent.{field}"), default)?;
        kv.get(&format!("agent.{name}.{field}"), shared)
    };
    let get_usize = |field: &str, default: usize| -> Result<usize, HarnessError> {
        let shared = kv.get(&format!("agent.{field}"), default)?;
        kv.get(&format!("agent.{name}.{field}"), shared)
    };
    let opt_key = format!("agent.{name}.optimizer");
    let opt_name = kv.raw(&opt_key).or(kv.raw("agent.optimizer")).unwrap_or("adam").to_string();
    let optimizer =
        OptimizerKind::parse(&opt_name).ok_or_else(|| kv.err(&opt_key, format!("unknown optimizer `{opt_name}`")))?;
    let cfg = DdpgConfig {
        state_dim: dims.0,
        action_dim: dims.1,
        actor_hidden: d.actor_hidden,
        critic_hidden: d.critic_hidden,
        action_lo: action.0,
        action_hi: action.1,
        gamma: get("gamma", d.gamma)?,
        tau: get("tau", d.tau)?,
        actor_lr: get("actor_lr", d.actor_lr)?,
        critic_lr: get("critic_lr", d.critic_lr)?,
        minibatch: get_usize("minibatch", d.minibatch)?,
        buffer_capacity: get_usize("buffer", d.buffer_capacity)?,
        noise_var: get("noise_var", if name == "arbitrate" { 0.1 } else { d.noise_var })?,
        noise_decay: get("noise_decay", d.noise_decay)?,
        grad_clip: get("grad_clip", d.grad_clip)?,
        optimizer,
        leaky_slope: get("leaky_slope", if name == "arbitrate" { 0.2 } else { 0.01 })?,
        actor_leaky_slope: match kv.raw(&format!("agent.{name}.actor_leaky_slope")) {
            Some(_) => Some(kv.get(&format!("agent.{name}.actor_leaky_slope"), 0.0)?),
            None => (name == "restore").then_some(1.0),
        },
        actor_bias: kv.bool(&format!("agent.{name}.actor_bias"), name != "restore")?,
        seed: kv.get(&format!("agent.{name}.seed"), seed)?,
    };
    cfg.validate().map_err(|e| kv.err(&format!("agent.{name}"), e))?;
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let mut kv = KeyValues::parse(&text)?;
        if let Some(s) = seed {
            kv.set("seed", s);
        }
        Self::from_kv(&kv)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        Self::from_kv(&KeyValues::parse(text)?)
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self, HarnessError> {
        let kind: ScenarioKind = kv
            .raw("scenario")
            .ok_or_else(|| kv.err("scenario", "missing"))?
            .parse()
            .map_err(|e| kv.err("scenario", e))?;
        let seed: u64 = kv.get("seed", 0)?;
        let dt: f64 = kv.get("dt", 0.01)?;
        let steps: usize = kv.get("steps", 2000)?;
        if !(dt > 0.0) || steps == 0 {
            return Err(kv.err("dt", "dt and steps must be positive"));
        }
        if let Some(d) = kv.raw("duration") {
            let d: f64 = d.parse().map_err(|e| kv.err("duration", e))?;
            if (steps as f64 * dt - d).abs() > 1e-9 * d.max(1.0) {
                return Err(kv.err("duration", format!("{steps} steps of {dt} s do not span {d} s")));
            }
        }

        let reference = CircleReference {
            center: kv.vec3("reference.center", Vec3::zeros())?,
            radius: kv.get("reference.radius", 0.1)?,
            period: kv.get("reference.period", 10.0)?,
            phase: kv.get("reference.phase", 0.0)?,
        };
        let kalman = GaussianLinearModel::constant_jerk(
            dt,
            kv.get("kalman.jerk_density", 1e-3)?,
            kv.get("kalman.measurement_var", DEFAULT_MEASUREMENT_VAR)?,
        )
        .map_err(|e| kv.err("kalman", e))?;
        let default_delay = if kind == ScenarioKind::TriplePilotDelay { 0.5 } else { 0.0 };
        let channel = ChannelConfig {
            base_delay: kv.get("channel.delay", default_delay)?,
            jitter_std: kv.get("channel.jitter", 0.0)?,
            loss_prob: kv.get("channel.loss", 0.0)?,
            seed: kv.get("channel.seed", seed.wrapping_add(100))?,
        };
        channel.validate().map_err(|e| kv.err("channel", e))?;

        let names = ["master1", "master2"];
        let masters = names[..kind.masters()]
            .iter()
            .enumerate()
            .map(|(i, n)| operator(kv, n, &reference, seed.wrapping_add(1 + i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        let copilot = operator(kv, "copilot", &reference, seed.wrapping_add(10))?;

        let mode = kv.raw("arbitration.mode").unwrap_or("full").to_string();
        let hi = match mode.as_str() {
            "full" => 1.0,
            "master-oriented" => MASTER_ORIENTED_MAX,
            other => {
                return Err(kv.err("arbitration.mode", format!("`{other}` is neither `full` nor `master-oriented`")))
            }
        };
        let fixed_weight: f64 = kv.get("arbitration.fixed_weight", 0.5_f64.min(hi))?;
        if !(0.0..=hi).contains(&fixed_weight) {
            return Err(kv.err("arbitration.fixed_weight", format!("must lie in [0, {hi}]")));
        }

        let gains =
            PidGains { kp: kv.get("plant.kp", 100.0)?, ki: kv.get("plant.ki", 0.0)?, kd: kv.get("plant.kd", 20.0)? };
        let environment = Environment {
            name: kv.raw("environment.name").unwrap_or("hard").to_string(),
            stiffness: kv.get("environment.stiffness", 1000.0)?,
            damping: kv.get("environment.damping", 5.0)?,
            surface: kv.get("environment.surface", 0.0)?,
            normal_axis: kv.get("environment.normal_axis", 2)?,
        };
        environment.validate().map_err(|e| kv.err("environment", e))?;

        let training = TrainingConfig {
            episodes: kv.get("training.episodes", 20)?,
            steps: kv.get("training.steps", 2000)?,
            radius_range: pair(kv.floats("training.radius", &[0.08, 0.12])?, kv, "training.radius")?,
            error_magnitude: kv.get("training.error_magnitude", 0.15)?,
            error_duration: kv.get("training.error_duration", 4.0)?,
            keep_best: kv.bool("training.keep_best", true)?,
        };

        let force = force_config(kv)?;
        let cfg = Self {
            kind,
            seed,
            dt,
            steps,
            reference,
            kalman,
            channel,
            masters,
            copilot,
            restoration: kv.bool("restoration.enabled", kind == ScenarioKind::TriplePilotDelay)?,
            restoration_scale: kv.get("restoration.state_scale", 10.0)?,
            arbitration_scale: kv.get("arbitration.state_scale", 30.0)?,
            weight_bounds: (0.0, hi),
            fixed_weight,
            restore_agent: agent(kv, "restore", RESTORE_DIMS, (-1.0, 1.0), seed.wrapping_add(20))?,
            arbitrate_agent: agent(kv, "arbitrate", ARBITRATE_DIMS, (0.0, hi), seed.wrapping_add(21))?,
            gains,
            mass: kv.get("plant.mass", 1.0)?,
            environment,
            training,
            force,
            hash: hex(&Sha256::digest(kv.canonical_text().as_bytes())),
        };
        kv.finish()?;
        Ok(cfg)
    }

    pub fn duration(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

fn force_config(kv: &KeyValues) -> Result<ForceDataConfig, HarnessError> {
    let names = kv.raw("force.materials").unwrap_or("hard soft sponge").to_string();
    let defaults = [("hard", 1000.0, 5.0, 0.0), ("soft", 500.0, 3.0, 0.04), ("sponge", 200.0, 2.0, 0.08)];
    let mut materials = Vec::new();
    for name in names.split_whitespace() {
        let d = defaults.iter().find(|m| m.0 == name).copied().unwrap_or((name, 500.0, 3.0, 0.0));
        materials.push(Material {
            name: name.to_string(),
            stiffness: kv.get(&format!("material.{name}.stiffness"), d.1)?,
            damping: kv.get(&format!("material.{name}.damping"), d.2)?,
            surface: kv.get(&format!("material.{name}.surface"), d.3)?,
        });
    }
    if materials.len() < 2 {
        return Err(kv.err("force.materials", "need at least two materials"));
    }
    let d = FuzzyConfig::default();
    let features = StateFeatures {
        axis: kv.get("environment.normal_axis", 2)?,
        velocity: kv.bool("force.use_velocity", true)?,
        acceleration: kv.bool("force.use_acceleration", false)?,
    };
    let model = FuzzyConfig {
        features,
        m: kv.get("force.m", 1.2)?,
        fou_delta: kv.get("force.fou_delta", d.fou_delta)?,
        b_lower: kv.get("force.b_lower", d.b_lower)?,
        b_upper: kv.get("force.b_upper", d.b_upper)?,
        sigma: kv.get("force.sigma", d.sigma)?,
        cluster: SubtractiveParams { radius: kv.get("force.cluster_radius", 0.15)?, ..d.cluster },
        fcm_tol: kv.get("force.fcm_tol", d.fcm_tol)?,
        fcm_max_iter: kv.get("force.fcm_max_iter", d.fcm_max_iter)?,
        wrls_gate: kv.get("force.wrls_gate", d.wrls_gate)?,
        s0: kv.get("force.s0", d.s0)?,
        passes: kv.get("force.passes", d.passes)?,
    };
    model.validate().map_err(|e| kv.err("force", e))?;
    let cfg = ForceDataConfig {
        materials,
        trials: kv.get("force.trials", 50)?,
        train_trials: kv.get("force.train_trials", 3)?,
        trial_duration: pair(kv.floats("force.trial_duration", &[2.0, 4.0])?, kv, "force.trial_duration")?,
        depth: pair(kv.floats("force.depth", &[0.005, 0.015])?, kv, "force.depth")?,
        clearance: kv.get("force.clearance", 0.005)?,
        position_noise: kv.get("force.position_noise", 1e-5)?,
        sensor_noise: kv.get("force.sensor_noise", 0.01)?,
        jerk_density: kv.get("force.jerk_density", 10.0)?,
        model,
    };
    if cfg.train_trials == 0 || cfg.train_trials >= cfg.trials {
        return Err(kv.err("force.train_trials", "must be at least 1 and below force.trials"));
    }
    Ok(cfg)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ScenarioConfig::parse("scenario = dual-pilot\n").unwrap();
        assert_eq!(cfg.kind, ScenarioKind::DualPilot);
        assert_eq!(cfg.masters.len(), 1);
        assert_eq!(cfg.channel.base_delay, 0.0);
        assert_eq!(cfg.steps, 2000);
        assert_eq!(cfg.weight_bounds, (0.0, 1.0));
    }

    #[test]
    fn error_windows_parse() {
        let cfg = ScenarioConfig::parse(
            "scenario = dual-pilot\noperator.master1.error.0 = bias 3 7 0.05 0 0\noperator.master1.error.1 = drift 9 12 0 0.04 0\n",
        )
        .unwrap();
        let w = &cfg.masters[0].windows;
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].shape, ErrorShape::Bias(Vec3::new(0.05, 0.0, 0.0)));
        assert_eq!(w[1].start, 9.0);
    }

    #[test]
    fn overlapping_windows_rejected() {
        let err = ScenarioConfig::parse(
            "scenario = dual-pilot\noperator.master1.error.0 = bias 3 7 0.05 0 0\noperator.master1.error.1 = bias 6 8 0 0 0\n",
        );
        assert!(matches!(err, Err(HarnessError::Config { .. })));
    }

    #[test]
    fn typos_and_duplicates_rejected() {
        assert!(ScenarioConfig::parse("scenario = dual-pilot\nchanel.delay = 0.5\n").is_err());
        assert!(ScenarioConfig::parse("scenario = dual-pilot\nseed = 1\nseed = 2\n").is_err());
        assert!(ScenarioConfig::parse("scenario = dual-pilot\nsteps = 100\nduration = 2\n").is_err());
        assert!(ScenarioConfig::parse("scenario = quad-pilot\n").is_err());
    }

    #[test]
    fn master_oriented_bounds() {
        let cfg = ScenarioConfig::parse("scenario = dual-pilot\narbitration.mode = master-oriented\n").unwrap();
        assert_eq!(cfg.weight_bounds, (0.0, 0.5));
        assert_eq!(cfg.arbitrate_agent.action_hi, 0.5);
    }

    #[test]
    fn hash_tracks_content_not_layout() {
        let a = ScenarioConfig::parse("scenario = dual-pilot\nseed = 3\n").unwrap();
        let b = ScenarioConfig::parse("# same\nseed=3\n\nscenario   =   dual-pilot\n").unwrap();
        let c = ScenarioConfig::parse("scenario = dual-pilot\nseed = 4\n").unwrap();
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
    }
}
