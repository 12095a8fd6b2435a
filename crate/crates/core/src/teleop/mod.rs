//! The collaboration loop's building blocks: restoration of the delayed
//! master command, arbitration with the co-pilot, the shaped rewards, the
//! slave plant and the scripted operators.

pub mod arbitration;
pub mod operator;
pub mod plant;
pub mod rewards;

pub use arbitration::{arbitrate, ArbitrationError, ArbitrationWeights, MASTER_ORIENTED_MAX};
pub use operator::{
    simulate_operator, CircleReference, ErrorShape, ErrorWindow, OperatorError, OperatorProfile, ScriptedOperator,
};
pub use plant::{Environment, PidGains, PlantError, SlavePlant};
pub use rewards::{mean_reward, reward_r1, reward_r2, shaped_reward};

use crate::ddpg::{DdpgAgent, DdpgError};
use crate::state::{CartesianState, Vec3};

/// Restoration agent input: the delayed velocity and acceleration, scaled.
pub fn restoration_state(delayed: &CartesianState, scale: f64) -> Vec<f64> {
    delayed.vel.iter().chain(delayed.acc.iter()).map(|v| v * scale).collect()
}

/// `X_mf = X_d + a`: the first three action components offset the position,
/// the last three the velocity.
pub fn apply_restoration(delayed: &CartesianState, action: &[f64]) -> CartesianState {
    assert_eq!(action.len(), 6, "restoration action has 6 components");
    let mut out = *delayed;
    out.pos += Vec3::new(action[0], action[1], action[2]);
    out.vel += Vec3::new(action[3], action[4], action[5]);
    out
}

/// Restoration error components `X_mc − X_mf` (position then velocity).
pub fn restoration_error(x_mc: &CartesianState, x_mf: &CartesianState) -> Vec<f64> {
    let dp = x_mc.pos - x_mf.pos;
    let dv = x_mc.vel - x_mf.vel;
    dp.iter().chain(dv.iter()).copied().collect()
}

pub fn restore_master(
    agent: &mut DdpgAgent,
    delayed: &CartesianState,
    scale: f64,
) -> Result<CartesianState, DdpgError> {
    let action = agent.act(&restoration_state(delayed, scale), false)?;
    Ok(apply_restoration(delayed, &action))
}

/// Arbitration agent input: both candidates' positional errors w.r.t. the
/// known task target, scaled.
pub fn arbitration_state(
    x_mf: &CartesianState,
    x_cpf: &CartesianState,
    target: &CartesianState,
    scale: f64,
) -> Vec<f64> {
    let em = x_mf.pos - target.pos;
    let ec = x_cpf.pos - target.pos;
    em.iter().chain(ec.iter()).map(|v| v * scale).collect()
}
