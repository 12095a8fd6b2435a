use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::{HiddenActivation, Mlp, MlpGrad, OutputActivation};
use super::replay::{ReplayBuffer, Transition};
use super::DdpgError;
use crate::checkpoint::{Checkpoint, CheckpointError, Section};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    /// Plain gradient descent.
    Sgd,
    /// Adam with the usual (0.9, 0.999, 1e-8) moments.
    Adam,
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(Self::Sgd),
            "adam" => Some(Self::Adam),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdpgConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub action_lo: f64,
    pub action_hi: f64,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub minibatch: usize,
    pub buffer_capacity: usize,
    pub noise_var: f64,
    pub noise_decay: f64,
    /// Gradient-norm clip; `0` disables.
    pub grad_clip: f64,
    pub optimizer: OptimizerKind,
    /// Negative-side slope of the hidden activations; `0` is a plain ReLU.
    pub leaky_slope: f64,
    /// Overrides `leaky_slope` in the actor only; `1` makes the actor's
    /// hidden layers linear.
    pub actor_leaky_slope: Option<f64>,
    /// With `false` the actor's biases are held at zero, so a zero state
    /// maps to the midpoint of the action bounds.
    pub actor_bias: bool,
    pub seed: u64,
}

fn activation(slope: f64) -> HiddenActivation {
    if slope == 0.0 {
        HiddenActivation::Relu
    } else {
        HiddenActivation::LeakyRelu { slope }
    }
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            state_dim: 1,
            action_dim: 1,
            actor_hidden: vec![3],
            critic_hidden: vec![5, 5, 5, 2],
            action_lo: -1.0,
            action_hi: 1.0,
            gamma: 0.99,
            tau: 1e-3,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            minibatch: 100,
            buffer_capacity: 10_000,
            noise_var: 0.01,
            noise_decay: 1e-5,
            grad_clip: 1.0,
            optimizer: OptimizerKind::Sgd,
            leaky_slope: 0.0,
            actor_leaky_slope: None,
            actor_bias: true,
            seed: 0,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<(), DdpgError> {
        let bad = |m: String| Err(DdpgError::InvalidConfig(m));
        if self.state_dim == 0 || self.action_dim == 0 {
            return bad("state and action dimensions must be positive".into());
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma = {} not in (0, 1)", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau = {} not in (0, 1]", self.tau));
        }
        if !(self.action_lo < self.action_hi) {
            return bad(format!("action bounds [{}, {}] are empty", self.action_lo, self.action_hi));
        }
        if self.minibatch == 0 || self.buffer_capacity == 0 {
            return bad("minibatch and buffer capacity must be positive".into());
        }
        if !(self.noise_var >= 0.0) || !(0.0..1.0).contains(&self.noise_decay) {
            return bad("noise variance must be >= 0 and decay in [0, 1)".into());
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) || !(self.grad_clip >= 0.0) {
            return bad("learning rates must be positive and grad_clip >= 0".into());
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return bad(format!("leaky_slope = {} not in [0, 1)", self.leaky_slope));
        }
        if let Some(a) = self.actor_leaky_slope.filter(|a| !(0.0..=1.0).contains(a)) {
            return bad(format!("actor_leaky_slope = {a} not in [0, 1]"));
        }
        Ok(())
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        activation(self.leaky_slope)
    }

    pub fn actor_hidden_activation(&self) -> HiddenActivation {
        activation(self.actor_leaky_slope.unwrap_or(self.leaky_slope))
    }

    pub fn actor_widths(&self) -> Vec<usize> {
        let mut w = vec![self.state_dim];
        w.extend(&self.actor_hidden);
        w.push(self.action_dim);
        w
    }

    pub fn critic_widths(&self) -> Vec<usize> {
        let mut w = vec![self.state_dim + self.action_dim];
        w.extend(&self.critic_hidden);
        w.push(1);
        w
    }

    fn to_section(&self, name: &str) -> Section {
        let mut s = Section::new(name);
        s.push_usizes("state_dim", &[self.state_dim]);
        s.push_usizes("action_dim", &[self.action_dim]);
        s.push_usizes("actor_hidden", &self.actor_hidden);
        s.push_usizes("critic_hidden", &self.critic_hidden);
        s.push_floats("action_bounds", &[self.action_lo, self.action_hi]);
        s.push_f64("gamma", self.gamma);
        s.push_f64("tau", self.tau);
        s.push_f64("actor_lr", self.actor_lr);
        s.push_f64("critic_lr", self.critic_lr);
        s.push_usizes("minibatch", &[self.minibatch]);
        s.push_usizes("buffer_capacity", &[self.buffer_capacity]);
        s.push_f64("noise_var", self.noise_var);
        s.push_f64("noise_decay", self.noise_decay);
        s.push_f64("grad_clip", self.grad_clip);
        s.push_str("optimizer", self.optimizer.name());
        s.push_f64("leaky_slope", self.leaky_slope);
        if let Some(a) = self.actor_leaky_slope {
            s.push_f64("actor_leaky_slope", a);
        }
        s.push_usizes("actor_bias", &[self.actor_bias as usize]);
        s.push_str("seed", &self.seed.to_string());
        s
    }

    fn from_section(s: &Section) -> Result<Self, CheckpointError> {
        let bounds = s.floats_len("action_bounds", 2)?;
        let optimizer =
            OptimizerKind::parse(s.str("optimizer")?).ok_or_else(|| s.bad("optimizer", "unknown optimizer".into()))?;
        Ok(Self {
            state_dim: s.usize("state_dim")?,
            action_dim: s.usize("action_dim")?,
            actor_hidden: s.usizes("actor_hidden")?,
            critic_hidden: s.usizes("critic_hidden")?,
            action_lo: bounds[0],
            action_hi: bounds[1],
            gamma: s.f64("gamma")?,
            tau: s.f64("tau")?,
            actor_lr: s.f64("actor_lr")?,
            critic_lr: s.f64("critic_lr")?,
            minibatch: s.usize("minibatch")?,
            buffer_capacity: s.usize("buffer_capacity")?,
            noise_var: s.f64("noise_var")?,
            noise_decay: s.f64("noise_decay")?,
            grad_clip: s.f64("grad_clip")?,
            optimizer,
            leaky_slope: s.f64("leaky_slope")?,
            actor_leaky_slope: s.has("actor_leaky_slope").then(|| s.f64("actor_leaky_slope")).transpose()?,
            actor_bias: s.usize("actor_bias")? != 0,
            seed: s.str("seed")?.parse().map_err(|e| s.bad("seed", format!("{e}")))?,
        })
    }
}

#[derive(Clone, Debug)]
struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    clip: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, clip: f64, n: usize) -> Self {
        Self { kind, lr, clip, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// One descent step on `mlp` along `grad`.
    fn step(&mut self, mlp: &mut Mlp, grad: &MlpGrad) {
        let mut g = grad.flat();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if self.clip > 0.0 && norm > self.clip {
            let k = self.clip / norm;
            g.iter_mut().for_each(|x| *x *= k);
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, gi) in mlp.params_mut().zip(&g) {
                    *p -= self.lr * gi;
                }
            }
            OptimizerKind::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                self.t += 1;
                let c1 = 1.0 - B1.powi(self.t);
                let c2 = 1.0 - B2.powi(self.t);
                for (((p, gi), m), v) in mlp.params_mut().zip(&g).zip(&mut self.m).zip(&mut self.v) {
                    *m = B1 * *m + (1.0 - B1) * gi;
                    *v = B2 * *v + (1.0 - B2) * gi * gi;
                    *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
                }
            }
        }
    }
}

/// Losses reported by one [`DdpgAgent::train_step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainStats {
    /// Mean squared TD error before the critic update.
    pub critic_loss: f64,
    /// Mean `Q(s, μ(s))` before the actor update.
    pub actor_objective: f64,
}

#[derive(Clone, Debug)]
pub struct DdpgAgent {
    config: DdpgConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    buffer: ReplayBuffer,
    noise_var: f64,
    rng: ChaCha8Rng,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
}

impl DdpgAgent {
    pub fn new(config: DdpgConfig) -> Result<Self, DdpgError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let head = OutputActivation::BoundedTanh { lo: config.action_lo, hi: config.action_hi };
        let hidden = config.hidden_activation();
        let mut actor = Mlp::new(&config.actor_widths(), head, &mut rng).with_hidden(config.actor_hidden_activation());
        if !config.actor_bias {
            actor.clear_biases();
        }
        let critic = Mlp::new(&config.critic_widths(), OutputActivation::Linear, &mut rng).with_hidden(hidden);
        Ok(Self::assemble(config, actor, critic, rng))
    }

    fn assemble(config: DdpgConfig, actor: Mlp, critic: Mlp, rng: ChaCha8Rng) -> Self {
        Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            noise_var: config.noise_var,
            actor_opt: Optimizer::new(config.optimizer, config.actor_lr, config.grad_clip, actor.param_count()),
            critic_opt: Optimizer::new(config.optimizer, config.critic_lr, config.grad_clip, critic.param_count()),
            actor,
            critic,
            rng,
            config,
        }
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.config
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    fn check_state(&self, s: &[f64]) -> Result<(), DdpgError> {
        if s.len() != self.config.state_dim {
            return Err(DdpgError::DimensionMismatch { what: "state", expected: self.config.state_dim, got: s.len() });
        }
        Ok(())
    }

    fn check_action(&self, a: &[f64]) -> Result<(), DdpgError> {
        if a.len() != self.config.action_dim {
            return Err(DdpgError::DimensionMismatch {
                what: "action",
                expected: self.config.action_dim,
                got: a.len(),
            });
        }
        Ok(())
    }

    /// Policy action, with decaying Gaussian exploration noise when `explore`.
    pub fn act(&mut self, s: &[f64], explore: bool) -> Result<Vec<f64>, DdpgError> {
        self.check_state(s)?;
        let mut a = self.actor.forward(s);
        if explore {
            let sd = self.noise_var.sqrt();
            for v in &mut a {
                let n: f64 = StandardNormal.sample(&mut self.rng);
                *v = (*v + sd * n).clamp(self.config.action_lo, self.config.action_hi);
            }
            self.noise_var *= 1.0 - self.config.noise_decay;
        }
        Ok(a)
    }

    pub fn critic_value(&self, s: &[f64], a: &[f64]) -> Result<f64, DdpgError> {
        self.check_state(s)?;
        self.check_action(a)?;
        Ok(self.critic.forward(&concat(s, a))[0])
    }

    pub fn push(&mut self, t: Transition) -> Result<(), DdpgError> {
        self.check_state(&t.state)?;
        self.check_state(&t.next_state)?;
        self.check_action(&t.action)?;
        self.buffer.push(t);
        Ok(())
    }

    pub fn sample(&mut self, n: usize) -> Result<Vec<Transition>, DdpgError> {
        if self.buffer.is_empty() {
            return Err(DdpgError::EmptyBuffer);
        }
        Ok(self.buffer.sample(n, &mut self.rng))
    }

    /// Bootstrapped targets `r + γ·Q′(s′, μ′(s′))`.
    pub fn td_targets(&self, batch: &[Transition]) -> Vec<f64> {
        batch
            .iter()
            .map(|t| {
                let a_next = self.actor_target.forward(&t.next_state);
                t.reward + self.config.gamma * self.critic_target.forward(&concat(&t.next_state, &a_next))[0]
            })
            .collect()
    }

    /// `(1/N)·Σ (y − Q(s, a))²` for fixed targets `y`.
    pub fn critic_loss(&self, batch: &[Transition], targets: &[f64]) -> f64 {
        let n = batch.len() as f64;
        batch
            .iter()
            .zip(targets)
            .map(|(t, y)| {
                let e = y - self.critic.forward(&concat(&t.state, &t.action))[0];
                e * e
            })
            .sum::<f64>()
            / n
    }

    pub fn critic_loss_grad(&self, batch: &[Transition], targets: &[f64]) -> (f64, MlpGrad) {
        let n = batch.len() as f64;
        let mut grad = MlpGrad::zeros_like(&self.critic);
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(targets) {
            let trace = self.critic.forward_trace(&concat(&t.state, &t.action));
            let e = y - trace.output()[0];
            loss += e * e;
            self.critic.backward(&trace, &[-2.0 * e / n], &mut grad);
        }
        (loss / n, grad)
    }

    /// `(1/N)·Σ Q(s, μ(s))` under the online networks.
    pub fn actor_objective(&self, batch: &[Transition]) -> f64 {
        let n = batch.len() as f64;
        batch.iter().map(|t| self.critic.forward(&concat(&t.state, &self.actor.forward(&t.state)))[0]).sum::<f64>() / n
    }

    /// The objective and its gradient w.r.t. the actor parameters.
    pub fn actor_objective_grad(&self, batch: &[Transition]) -> (f64, MlpGrad) {
        let n = batch.len() as f64;
        let sd = self.config.state_dim;
        let mut grad = MlpGrad::zeros_like(&self.actor);
        let mut scratch = MlpGrad::zeros_like(&self.critic);
        let mut objective = 0.0;
        for t in batch {
            let actor_trace = self.actor.forward_trace(&t.state);
            let critic_trace = self.critic.forward_trace(&concat(&t.state, actor_trace.output()));
            objective += critic_trace.output()[0];
            let d_input = self.critic.backward(&critic_trace, &[1.0 / n], &mut scratch);
            self.actor.backward(&actor_trace, &d_input[sd..], &mut grad);
        }
        (objective / n, grad)
    }

    /// One critic regression step, one policy-gradient ascent step, then
    /// soft target updates.
    pub fn train_step(&mut self, batch: &[Transition]) -> Result<TrainStats, DdpgError> {
        if batch.is_empty() {
            return Err(DdpgError::EmptyBatch);
        }
        for t in batch {
            self.check_state(&t.state)?;
            self.check_state(&t.next_state)?;
            self.check_action(&t.action)?;
        }
        let targets = self.td_targets(batch);
        let (critic_loss, critic_grad) = self.critic_loss_grad(batch, &targets);
        self.critic_opt.step(&mut self.critic, &critic_grad);

        let (actor_objective, mut actor_grad) = self.actor_objective_grad(batch);
        // ascend the objective
        actor_grad.scale(-1.0);
        self.actor_opt.step(&mut self.actor, &actor_grad);
        if !self.config.actor_bias {
            self.actor.clear_biases();
        }

        self.soft_update_targets();
        if !(self.actor.all_finite() && self.critic.all_finite()) {
            return Err(DdpgError::Diverged);
        }
        Ok(TrainStats { critic_loss, actor_objective })
    }

    /// Samples a minibatch (the whole buffer during warm-up) and trains on it.
    pub fn learn(&mut self) -> Result<Option<TrainStats>, DdpgError> {
        if self.buffer.is_empty() {
            return Ok(None);
        }
        let batch = self.sample(self.config.minibatch)?;
        self.train_step(&batch).map(Some)
    }

    pub fn soft_update_targets(&mut self) {
        let tau = self.config.tau;
        self.actor_target.soft_update_from(&self.actor, tau);
        self.critic_target.soft_update_from(&self.critic, tau);
    }

    pub fn write_sections(&self, name: &str, doc: &mut Checkpoint) {
        let mut cfg = self.config.to_section(&format!("{name}.config"));
        cfg.push_f64("current_noise_var", self.noise_var);
        doc.push(cfg);
        doc.push(self.actor.to_section(&format!("{name}.actor")));
        doc.push(self.critic.to_section(&format!("{name}.critic")));
        doc.push(self.actor_target.to_section(&format!("{name}.actor_target")));
        doc.push(self.critic_target.to_section(&format!("{name}.critic_target")));
    }

    pub fn read_sections(name: &str, doc: &Checkpoint) -> Result<Self, DdpgError> {
        let cfg_section = doc.section(&format!("{name}.config"))?;
        let config = DdpgConfig::from_section(cfg_section)?;
        config.validate()?;
        let actor = Mlp::from_section(doc.section(&format!("{name}.actor"))?)?;
        let critic = Mlp::from_section(doc.section(&format!("{name}.critic"))?)?;
        if actor.widths() != config.actor_widths() || critic.widths() != config.critic_widths() {
            return Err(DdpgError::InvalidConfig(format!("{name}: network shapes disagree with the stored config")));
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut agent = Self::assemble(config, actor, critic, rng);
        agent.actor_target = Mlp::from_section(doc.section(&format!("{name}.actor_target"))?)?;
        agent.critic_target = Mlp::from_section(doc.section(&format!("{name}.critic_target"))?)?;
        agent.noise_var = cfg_section.f64("current_noise_var")?;
        Ok(agent)
    }
}

pub(crate) fn concat(s: &[f64], a: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(s.len() + a.len());
    v.extend_from_slice(s);
    v.extend_from_slice(a);
    v
}
