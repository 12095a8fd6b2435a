//! Episode-based training of the restoration and arbitration agents.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::metrics::rmse3;
use super::pipeline::{Agents, AxisStep, Pipeline};
use super::HarnessError;
use crate::ddpg::{DdpgAgent, DdpgError, Transition};
use crate::teleop::{ErrorShape, ErrorWindow};
use crate::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Sum over ticks of the per-axis mean reward; `None` if the agent is not trained.
    pub restore_return: Option<f64>,
    pub arbitrate_return: Option<f64>,
    pub restore_critic_loss: Option<f64>,
    pub arbitrate_critic_loss: Option<f64>,
    /// Held-out RMSE of `X_mf` against `X_mc`, when `keep_best` is on.
    pub restore_validation: Option<f64>,
    /// Held-out RMSE of `X_sc` against the reference, when `keep_best` is on.
    pub arbitrate_validation: Option<f64>,
}

/// The scenario with a randomized circle and freshly placed operator errors,
/// one window per operator in disjoint time slots.
pub fn episode_config(cfg: &ScenarioConfig, rng: &mut impl Rng) -> ScenarioConfig {
    let mut ep = cfg.clone();
    let tr = &cfg.training;
    ep.steps = tr.steps;
    ep.reference.phase = rng.random_range(0.0..TAU);
    ep.reference.radius = rng.random_range(tr.radius_range.0..=tr.radius_range.1);

    let duration = ep.duration();
    let count = ep.masters.len() + 1;
    let slot = duration / count as f64;
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    let span = tr.error_duration.min(slot);
    let windows: Vec<ErrorWindow> = order
        .into_iter()
        .map(|k| {
            let start = k as f64 * slot + rng.random_range(0.0..=(slot - span));
            let mut bias = Vec3::zeros();
            for b in bias.iter_mut().take(2) {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                *b = sign * tr.error_magnitude * rng.random_range(0.5..=1.0);
            }
            let shape = if rng.random_bool(0.5) { ErrorShape::Bias(bias) } else { ErrorShape::Drift(bias) };
            ErrorWindow { start, end: start + span, shape }
        })
        .collect();
    let mut windows = windows.into_iter();
    for op in ep.masters.iter_mut().chain(std::iter::once(&mut ep.copilot)) {
        op.reference = ep.reference.clone();
        op.windows = if span > 0.0 { vec![windows.next().unwrap()] } else { Vec::new() };
        op.seed = rng.random();
    }
    ep.channel.seed = rng.random();
    ep
}

fn diverged(name: &'static str, episode: usize, step: usize) -> impl Fn(DdpgError) -> HarnessError {
    move |e| match e {
        DdpgError::Diverged => HarnessError::Diverged { agent: name, episode, step },
        other => other.into(),
    }
}

/// Pushes one transition per axis and takes one learning step. Returns the
/// critic loss if a step was taken.
fn learn_from(agent: &mut DdpgAgent, prev: &[AxisStep; 3], next: &[AxisStep; 3]) -> Result<Option<f64>, DdpgError> {
    for (p, n) in prev.iter().zip(next) {
        agent.push(Transition {
            state: p.state.clone(),
            action: p.action.clone(),
            reward: p.reward,
            next_state: n.state.clone(),
        })?;
    }
    Ok(agent.learn()?.map(|s| s.critic_loss))
}

fn mean_axis_reward(steps: &[AxisStep; 3]) -> f64 {
    steps.iter().map(|s| s.reward).sum::<f64>() / 3.0
}

/// Fresh agents for the scenario: restoration only when enabled.
pub fn new_agents(cfg: &ScenarioConfig) -> Result<Agents, HarnessError> {
    Ok(Agents {
        restore: cfg.restoration.then(|| DdpgAgent::new(cfg.restore_agent.clone())).transpose()?,
        arbitrate: Some(DdpgAgent::new(cfg.arbitrate_agent.clone())?),
    })
}

/// Greedy run of `cfg` scored as `(RMSE(X_mf, X_mc), RMSE(X_sc, X_ref))`
/// over linked ticks.
fn validate(cfg: &ScenarioConfig, agents: &mut Agents) -> Result<(f64, f64), HarnessError> {
    let mut pipeline = Pipeline::new(cfg)?;
    let (mut mf, mut mc, mut sc, mut reference) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..cfg.steps {
        let r = pipeline.tick(agents, false, None)?.record;
        if r.link {
            mf.push(r.x_mf);
            mc.push(r.x_mc);
            sc.push(r.x_sc);
            reference.push(r.reference);
        }
    }
    Ok((rmse3(&mf, &mc)?.norm, rmse3(&sc, &reference)?.norm))
}

/// The same episode with every operator error removed.
fn without_errors(cfg: &ScenarioConfig) -> ScenarioConfig {
    let mut clean = cfg.clone();
    for op in clean.masters.iter_mut().chain(std::iter::once(&mut clean.copilot)) {
        op.windows.clear();
    }
    clean
}

fn keep_if_better(best: &mut Option<(f64, DdpgAgent)>, score: f64, agent: Option<&DdpgAgent>) {
    if let Some(agent) = agent {
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            *best = Some((score, agent.clone()));
        }
    }
}

/// Runs `cfg.training.episodes` exploring episodes, training both agents
/// online after every tick. `on_episode` sees each episode's statistics.
pub fn train_agents(
    cfg: &ScenarioConfig,
    mut on_episode: impl FnMut(&EpisodeStats),
) -> Result<(Agents, Vec<EpisodeStats>), HarnessError> {
    let mut agents = new_agents(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut curve = Vec::with_capacity(cfg.training.episodes);
    let held_out = episode_config(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7a11_da7e));
    let held_out_clean = without_errors(&held_out);
    let (mut best_restore, mut best_arbitrate) = (None, None);
    for episode in 0..cfg.training.episodes {
        let ep_cfg = episode_config(cfg, &mut rng);
        let mut pipeline = Pipeline::new(&ep_cfg)?;
        let mut prev: Option<super::pipeline::Tick> = None;
        let (mut r1, mut r2) = (0.0, 0.0);
        let (mut l1, mut n1, mut l2, mut n2) = (0.0, 0usize, 0.0, 0usize);
        for step in 0..ep_cfg.steps {
            let tick = pipeline.tick(&mut agents, true, None)?;
            if let Some(steps) = &tick.restore {
                r1 += mean_axis_reward(steps);
            }
            if let Some(steps) = &tick.arbitrate {
                r2 += mean_axis_reward(steps);
            }
            if let Some(p) = &prev {
                if let (Some(agent), Some(a), Some(b)) = (agents.restore.as_mut(), &p.restore, &tick.restore) {
                    if let Some(loss) = learn_from(agent, a, b).map_err(diverged("restore", episode, step))? {
                        l1 += loss;
                        n1 += 1;
                    }
                }
                if let (Some(agent), Some(a), Some(b)) = (agents.arbitrate.as_mut(), &p.arbitrate, &tick.arbitrate) {
                    if let Some(loss) = learn_from(agent, a, b).map_err(diverged("arbitrate", episode, step))? {
                        l2 += loss;
                        n2 += 1;
                    }
                }
            }
            prev = Some(tick);
        }
        let scores = if cfg.training.keep_best {
            let s1 = if agents.restore.is_some() { validate(&held_out_clean, &mut agents)?.0 } else { f64::NAN };
            let s2 = validate(&held_out, &mut agents)?.1;
            keep_if_better(&mut best_restore, s1, agents.restore.as_ref());
            keep_if_better(&mut best_arbitrate, s2, agents.arbitrate.as_ref());
            Some((s1, s2))
        } else {
            None
        };
        let stats = EpisodeStats {
            episode,
            restore_return: agents.restore.is_some().then_some(r1),
            arbitrate_return: agents.arbitrate.is_some().then_some(r2),
            restore_critic_loss: (n1 > 0).then(|| l1 / n1 as f64),
            arbitrate_critic_loss: (n2 > 0).then(|| l2 / n2 as f64),
            restore_validation: scores.filter(|_| agents.restore.is_some()).map(|s| s.0),
            arbitrate_validation: scores.map(|s| s.1),
        };
        on_episode(&stats);
        curve.push(stats);
    }
    if let Some((_, a)) = best_restore {
        agents.restore = Some(a);
    }
    if let Some((_, a)) = best_arbitrate {
        agents.arbitrate = Some(a);
    }
    Ok((agents, curve))
}
