use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Position, velocity and acceleration of a Cartesian point (m, m/s, m/s²).
///
/// Every signal in the framework (operator commands, fused and restored
/// commands, slave state) travels as one of these.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub pos: Vec3,
    pub vel: Vec3,
    pub acc: Vec3,
}

impl CartesianState {
    pub fn new(pos: Vec3, vel: Vec3, acc: Vec3) -> Self {
        Self { pos, vel, acc }
    }

    pub fn at_rest(pos: Vec3) -> Self {
        Self { pos, ..Self::default() }
    }

    pub fn is_finite(&self) -> bool {
        self.pos.iter().chain(self.vel.iter()).chain(self.acc.iter()).all(|v| v.is_finite())
    }

    /// The `(position, velocity, acceleration)` triple of one axis.
    pub fn axis(&self, axis: usize) -> [f64; 3] {
        [self.pos[axis], self.vel[axis], self.acc[axis]]
    }

    pub fn set_axis(&mut self, axis: usize, value: [f64; 3]) {
        self.pos[axis] = value[0];
        self.vel[axis] = value[1];
        self.acc[axis] = value[2];
    }

    /// Assembles a state from three per-axis `(pos, vel, acc)` triples.
    pub fn from_axes(axes: [[f64; 3]; 3]) -> Self {
        let mut s = Self::default();
        for (i, a) in axes.iter().enumerate() {
            s.set_axis(i, *a);
        }
        s
    }
}
