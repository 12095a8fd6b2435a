use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{CartesianState, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("non-finite command")]
    NonFiniteCommand,
    #[error("invalid plant config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl Default for PidGains {
    /// Critically damped for a unit mass (ωn = 10 rad/s).
    fn default() -> Self {
        Self { kp: 100.0, ki: 0.0, kd: 20.0 }
    }
}

/// A compliant block whose top surface sits at `surface` along `normal_axis`.
///
/// Below the surface the block resists with a Kelvin–Voigt law; `F_se` is
/// the force the slave exerts on it, `−(k·δ + c·δ̇)` along the outward normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub name: String,
    pub stiffness: f64,
    pub damping: f64,
    pub surface: f64,
    pub normal_axis: usize,
}

impl Environment {
    /// No contact anywhere.
    pub fn free_space() -> Self {
        Self { name: "free".into(), stiffness: 0.0, damping: 0.0, surface: f64::NEG_INFINITY, normal_axis: 2 }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.stiffness >= 0.0 && self.damping >= 0.0) || self.normal_axis > 2 {
            return Err(PlantError::InvalidConfig(format!("environment `{}`", self.name)));
        }
        Ok(())
    }

    /// Penetration depth δ ≥ 0 and its rate.
    pub fn penetration(&self, s: &CartesianState) -> Option<(f64, f64)> {
        let z = s.pos[self.normal_axis];
        (z < self.surface).then(|| (self.surface - z, -s.vel[self.normal_axis]))
    }

    pub fn force(&self, s: &CartesianState) -> Vec3 {
        let mut f = Vec3::zeros();
        if let Some((depth, rate)) = self.penetration(s) {
            f[self.normal_axis] = -(self.stiffness * depth + self.damping * rate);
        }
        f
    }
}

/// Unit-mass Cartesian point under per-axis PID control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlavePlant {
    pub state: CartesianState,
    pub gains: PidGains,
    pub mass: f64,
    pub env: Environment,
    integral: Vec3,
}

impl SlavePlant {
    pub fn new(state: CartesianState, gains: PidGains, env: Environment) -> Result<Self, PlantError> {
        env.validate()?;
        Ok(Self { state, gains, mass: 1.0, env, integral: Vec3::zeros() })
    }

    /// Advances one control period with semi-implicit Euler. Returns the new
    /// state and the contact force at that state.
    pub fn step(&mut self, cmd: &CartesianState, dt: f64) -> Result<(CartesianState, Vec3), PlantError> {
        if !cmd.is_finite() {
            return Err(PlantError::NonFiniteCommand);
        }
        let g = self.gains;
        let err = cmd.pos - self.state.pos;
        self.integral += err * dt;
        let u = err * g.kp + self.integral * g.ki + (cmd.vel - self.state.vel) * g.kd;
        let reaction = -self.env.force(&self.state);
        let acc = (u + reaction) / self.mass;
        self.state.acc = acc;
        self.state.vel += acc * dt;
        self.state.pos += self.state.vel * dt;
        Ok((self.state, self.env.force(&self.state)))
    }
}
