//! One control tick of the full loop, shared by training and evaluation.

use super::config::ScenarioConfig;
use super::HarnessError;
use crate::channel::Channel;
use crate::ddpg::DdpgAgent;
use crate::fuzzyforce::{FuzzyError, FuzzyModel};
use crate::kalman::AxisFilters;
use crate::teleop::{arbitrate, shaped_reward, ArbitrationWeights, CircleReference, ScriptedOperator, SlavePlant};
use crate::{CartesianState, Vec3};

/// The two learned components; either may be absent.
#[derive(Clone, Debug, Default)]
pub struct Agents {
    pub restore: Option<DdpgAgent>,
    pub arbitrate: Option<DdpgAgent>,
}

/// Positions (and weights and forces) logged for one tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    /// Whether the slave has received any master command yet.
    pub link: bool,
    pub reference: Vec3,
    /// Raw master commands; the second is NaN with a single master.
    pub masters: [Vec3; 2],
    pub copilot: Vec3,
    pub x_mc: Vec3,
    pub x_d: Vec3,
    pub x_mf: Vec3,
    pub x_cpf: Vec3,
    pub w: Vec3,
    pub x_sc: Vec3,
    pub x_s: Vec3,
    pub f_se: Vec3,
    /// NaN until the master side has heard from the slave.
    pub f_hat: Vec3,
}

/// What one agent saw and did on one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisStep {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
}

#[derive(Clone, Debug)]
pub struct Tick {
    pub record: TickRecord,
    /// Per-axis restoration steps, present once the link is up.
    pub restore: Option<[AxisStep; 3]>,
    pub arbitrate: Option<[AxisStep; 3]>,
}

pub struct Pipeline {
    dt: f64,
    reference: CircleReference,
    masters: Vec<ScriptedOperator>,
    copilot: ScriptedOperator,
    master_kf: AxisFilters,
    copilot_kf: AxisFilters,
    slave_kf: AxisFilters,
    forward: Channel<CartesianState>,
    backward: Channel<CartesianState>,
    plant: SlavePlant,
    idle: CartesianState,
    last_slave_msg: Option<f64>,
    restoration: bool,
    restoration_scale: f64,
    arbitration_scale: f64,
    weight_bounds: (f64, f64),
    fixed_weight: f64,
    k: usize,
}

fn axis_pair(a: &Vec3, b: &Vec3, j: usize, scale: f64) -> Vec<f64> {
    vec![a[j] * scale, b[j] * scale]
}

/// Per-axis arbitration state `(|e_m|, |e_c|)`, scaled.
pub fn arbitration_axis_state(e_m: f64, e_c: f64, scale: f64) -> Vec<f64> {
    vec![e_m.abs() * scale, e_c.abs() * scale]
}

impl Pipeline {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        let masters = cfg.masters.iter().map(|p| ScriptedOperator::new(p.clone())).collect::<Result<Vec<_>, _>>()?;
        let copilot = ScriptedOperator::new(cfg.copilot.clone())?;
        let start = cfg.reference.at(0.0);
        let mut plant = SlavePlant::new(start, cfg.gains, cfg.environment.clone())?;
        plant.mass = cfg.mass;
        let mut back_cfg = cfg.channel.clone();
        back_cfg.seed = back_cfg.seed.wrapping_add(1);
        Ok(Self {
            dt: cfg.dt,
            reference: cfg.reference.clone(),
            masters,
            copilot,
            master_kf: AxisFilters::diffuse(cfg.kalman.clone()),
            copilot_kf: AxisFilters::diffuse(cfg.kalman.clone()),
            slave_kf: AxisFilters::diffuse(cfg.kalman.clone()),
            forward: Channel::new(cfg.channel.clone())?.with_hold_last(true),
            backward: Channel::new(back_cfg)?,
            plant,
            idle: CartesianState::at_rest(start.pos),
            last_slave_msg: None,
            restoration: cfg.restoration,
            restoration_scale: cfg.restoration_scale,
            arbitration_scale: cfg.arbitration_scale,
            weight_bounds: cfg.weight_bounds,
            fixed_weight: cfg.fixed_weight,
            k: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.dt
    }

    /// Advances one period. With `explore`, agents add exploration noise to
    /// the actions they are scored on; the restored command passed
    /// downstream always uses the greedy restoration policy.
    pub fn tick(
        &mut self,
        agents: &mut Agents,
        explore: bool,
        force: Option<&FuzzyModel>,
    ) -> Result<Tick, HarnessError> {
        let t = self.time();
        let reference = self.reference.at(t);

        let raw: Vec<CartesianState> = self.masters.iter_mut().map(|m| m.sample(t)).collect();
        let x_mc = match raw.as_slice() {
            [one] => self.master_kf.track(&one.pos)?,
            [a, b] => self.master_kf.fuse(&a.pos, &b.pos)?,
            _ => unreachable!("one or two masters"),
        };
        self.forward.send(x_mc, t)?;
        let received = self.forward.recv_latest(t);
        let link = received.is_some();
        let x_d = received.map_or(self.idle, |m| m.payload);

        let mut restore_steps = None;
        let mut x_mf = x_d;
        if let (true, true, Some(agent)) = (self.restoration, link, agents.restore.as_mut()) {
            let mut steps = Vec::with_capacity(3);
            for j in 0..3 {
                let s = axis_pair(&x_d.vel, &x_d.acc, j, self.restoration_scale);
                let greedy = agent.act(&s, false)?;
                let action = if explore { agent.act(&s, true)? } else { greedy.clone() };
                let reward = 0.5
                    * (shaped_reward(x_mc.pos[j] - x_d.pos[j] - action[0])
                        + shaped_reward(x_mc.vel[j] - x_d.vel[j] - action[1]));
                x_mf.pos[j] += greedy[0];
                x_mf.vel[j] += greedy[1];
                steps.push(AxisStep { state: s, action, reward });
            }
            restore_steps = Some(steps.try_into().unwrap());
        }

        let cp = self.copilot.sample(t);
        let x_cpf = self.copilot_kf.track(&cp.pos)?;

        let (lo, hi) = self.weight_bounds;
        let mut arbitration = Vec::new();
        let mut w = Vec3::repeat(self.fixed_weight);
        if let Some(agent) = agents.arbitrate.as_mut() {
            let em = x_mf.pos - reference.pos;
            let ec = x_cpf.pos - reference.pos;
            for j in 0..3 {
                let s = arbitration_axis_state(em[j], ec[j], self.arbitration_scale);
                let action = agent.act(&s, explore)?;
                w[j] = action[0];
                arbitration.push((s, action));
            }
        }
        let w = ArbitrationWeights::clamped(w, lo, hi)?;
        let x_sc = arbitrate(&w, &x_cpf, &x_mf);
        let arbitrate_steps = (!arbitration.is_empty()).then(|| {
            let steps: Vec<AxisStep> = arbitration
                .into_iter()
                .enumerate()
                .map(|(j, (state, action))| AxisStep {
                    state,
                    action,
                    reward: shaped_reward(x_sc.pos[j] - reference.pos[j]),
                })
                .collect();
            steps.try_into().unwrap()
        });

        let (x_s, f_se) = self.plant.step(&x_sc, self.dt)?;
        self.backward.send(x_s, t)?;
        if let Some(msg) = self.backward.recv_latest(t) {
            self.slave_kf.track(&msg.payload.pos)?;
            self.last_slave_msg = Some(msg.sent_at);
        }
        let f_hat = match (self.last_slave_msg, force) {
            (Some(sent), Some(model)) => {
                let age = ((t - sent) / self.dt).round().max(0.0) as usize;
                match model.predict_force(&self.slave_kf.extrapolate(age)) {
                    Ok(f) => f,
                    Err(FuzzyError::OutOfDomain) => Vec3::repeat(f64::NAN),
                    Err(e) => return Err(e.into()),
                }
            }
            _ => Vec3::repeat(f64::NAN),
        };

        self.k += 1;
        let record = TickRecord {
            t,
            link,
            reference: reference.pos,
            masters: [raw[0].pos, raw.get(1).map_or(Vec3::repeat(f64::NAN), |m| m.pos)],
            copilot: cp.pos,
            x_mc: x_mc.pos,
            x_d: x_d.pos,
            x_mf: x_mf.pos,
            x_cpf: x_cpf.pos,
            w: w.diag(),
            x_sc: x_sc.pos,
            x_s: x_s.pos,
            f_se,
            f_hat,
        };
        Ok(Tick { record, restore: restore_steps, arbitrate: arbitrate_steps })
    }
}
