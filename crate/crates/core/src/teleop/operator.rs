//! Scripted stand-ins for the human operators.
//!
//! An operator traces a reference circle, adds white positional noise, and
//! makes deliberate mistakes inside configured error windows.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{CartesianState, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("error window [{start}, {end}] is empty or not finite")]
    EmptyWindow { start: f64, end: f64 },
    #[error("error windows [{a_start}, {a_end}] and [{b_start}, {b_end}] overlap")]
    Overlap { a_start: f64, a_end: f64, b_start: f64, b_end: f64 },
    #[error("invalid operator profile: {0}")]
    Invalid(String),
}

/// Circle in the x–y plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleReference {
    pub center: Vec3,
    pub radius: f64,
    pub period: f64,
    pub phase: f64,
}

impl Default for CircleReference {
    fn default() -> Self {
        Self { center: Vec3::zeros(), radius: 0.1, period: 10.0, phase: 0.0 }
    }
}

impl CircleReference {
    pub fn at(&self, t: f64) -> CartesianState {
        let w = TAU / self.period;
        let (s, c) = (w * t + self.phase).sin_cos();
        let r = self.radius;
        CartesianState {
            pos: self.center + Vec3::new(r * c, r * s, 0.0),
            vel: Vec3::new(-r * w * s, r * w * c, 0.0),
            acc: Vec3::new(-r * w * w * c, -r * w * w * s, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ErrorShape {
    /// Constant positional offset for the whole window.
    Bias(Vec3),
    /// Offset ramping linearly from zero at the start to the vector at the end.
    Drift(Vec3),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorWindow {
    pub start: f64,
    pub end: f64,
    pub shape: ErrorShape,
}

impl ErrorWindow {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    /// Position and velocity perturbation at `t` (zero outside the window).
    pub fn offset(&self, t: f64) -> (Vec3, Vec3) {
        if !self.contains(t) {
            return (Vec3::zeros(), Vec3::zeros());
        }
        match self.shape {
            ErrorShape::Bias(b) => (b, Vec3::zeros()),
            ErrorShape::Drift(d) => {
                let span = self.end - self.start;
                (d * ((t - self.start) / span), d / span)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorProfile {
    pub reference: CircleReference,
    pub noise_std: f64,
    pub windows: Vec<ErrorWindow>,
    pub seed: u64,
}

impl OperatorProfile {
    pub fn ideal(reference: CircleReference) -> Self {
        Self { reference, noise_std: 0.0, windows: Vec::new(), seed: 0 }
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(OperatorError::Invalid(format!("noise_std = {}", self.noise_std)));
        }
        if !(self.reference.period > 0.0 && self.reference.radius >= 0.0) {
            return Err(OperatorError::Invalid("circle period must be positive and radius non-negative".into()));
        }
        for w in &self.windows {
            if !(w.start.is_finite() && w.end.is_finite() && w.start < w.end) {
                return Err(OperatorError::EmptyWindow { start: w.start, end: w.end });
            }
        }
        let mut sorted = self.windows.clone();
        sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
        for pair in sorted.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(OperatorError::Overlap {
                    a_start: pair[0].start,
                    a_end: pair[0].end,
                    b_start: pair[1].start,
                    b_end: pair[1].end,
                });
            }
        }
        Ok(())
    }

    /// Noise-free command: reference plus any active error.
    pub fn command(&self, t: f64) -> CartesianState {
        let mut s = self.reference.at(t);
        for w in &self.windows {
            let (dp, dv) = w.offset(t);
            s.pos += dp;
            s.vel += dv;
        }
        s
    }

    pub fn in_error(&self, t: f64) -> bool {
        self.windows.iter().any(|w| w.contains(t))
    }
}

/// Noise-free operator output at `t`.
pub fn simulate_operator(profile: &OperatorProfile, t: f64) -> CartesianState {
    profile.command(t)
}

/// A profile with its own noise stream.
#[derive(Clone, Debug)]
pub struct ScriptedOperator {
    profile: OperatorProfile,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl ScriptedOperator {
    pub fn new(profile: OperatorProfile) -> Result<Self, OperatorError> {
        profile.validate()?;
        let noise = (profile.noise_std > 0.0).then(|| Normal::new(0.0, profile.noise_std).unwrap());
        Ok(Self { rng: ChaCha8Rng::seed_from_u64(profile.seed), profile, noise })
    }

    pub fn profile(&self) -> &OperatorProfile {
        &self.profile
    }

    pub fn sample(&mut self, t: f64) -> CartesianState {
        let mut s = self.profile.command(t);
        if let Some(n) = self.noise {
            let rng = &mut self.rng;
            s.pos += Vec3::from_fn(|_, _| n.sample(rng));
        }
        s
    }
}
