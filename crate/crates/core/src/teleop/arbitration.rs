use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{CartesianState, Vec3};

/// Upper weight bound when the master must stay dominant.
pub const MASTER_ORIENTED_MAX: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum ArbitrationError {
    #[error("weight bounds [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1")]
    BadBounds { lo: f64, hi: f64 },
    #[error("weight {value} on axis {axis} is outside [{lo}, {hi}]")]
    OutOfBounds { axis: usize, value: f64, lo: f64, hi: f64 },
}

/// Diagonal of the co-pilot weight matrix `W_m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArbitrationWeights {
    diag: Vec3,
    lo: f64,
    hi: f64,
}

impl ArbitrationWeights {
    pub fn new(diag: Vec3, lo: f64, hi: f64) -> Result<Self, ArbitrationError> {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(ArbitrationError::BadBounds { lo, hi });
        }
        for (axis, &value) in diag.iter().enumerate() {
            if !(lo..=hi).contains(&value) {
                return Err(ArbitrationError::OutOfBounds { axis, value, lo, hi });
            }
        }
        Ok(Self { diag, lo, hi })
    }

    /// Clamps each entry into `[lo, hi]` instead of rejecting it.
    pub fn clamped(diag: Vec3, lo: f64, hi: f64) -> Result<Self, ArbitrationError> {
        Self::new(diag.map(|v| v.clamp(lo, hi)), lo, hi)
    }

    pub fn uniform(w: f64) -> Result<Self, ArbitrationError> {
        Self::new(Vec3::repeat(w), 0.0, 1.0)
    }

    pub fn diag(&self) -> Vec3 {
        self.diag
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// `X_sc = W_m·X_cpf + (I − W_m)·X_mf`, applied to position, velocity and
/// acceleration alike.
pub fn arbitrate(w: &ArbitrationWeights, x_cpf: &CartesianState, x_mf: &CartesianState) -> CartesianState {
    let blend = |c: &Vec3, m: &Vec3| c.component_mul(&w.diag) + m.component_mul(&w.diag.map(|v| 1.0 - v));
    CartesianState {
        pos: blend(&x_cpf.pos, &x_mf.pos),
        vel: blend(&x_cpf.vel, &x_mf.vel),
        acc: blend(&x_cpf.acc, &x_mf.acc),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(p: [f64; 3]) -> CartesianState {
        CartesianState::at_rest(Vec3::from(p))
    }

    #[test]
    fn extreme_weights_select_one_side() {
        let c = st([1.0, 2.0, 3.0]);
        let m = st([-1.0, 0.5, 0.0]);
        assert_eq!(arbitrate(&ArbitrationWeights::uniform(0.0).unwrap(), &c, &m), m);
        assert_eq!(arbitrate(&ArbitrationWeights::uniform(1.0).unwrap(), &c, &m), c);
    }

    #[test]
    fn blend_example() {
        let x = arbitrate(&ArbitrationWeights::uniform(0.3).unwrap(), &st([1.0, 0.0, 0.0]), &st([0.0, 1.0, 0.0]));
        assert!((x.pos - Vec3::new(0.3, 0.7, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn bounds_enforced() {
        assert!(ArbitrationWeights::new(Vec3::repeat(0.6), 0.0, MASTER_ORIENTED_MAX).is_err());
        assert!(ArbitrationWeights::new(Vec3::repeat(0.2), 0.5, 0.4).is_err());
        let w = ArbitrationWeights::clamped(Vec3::new(0.9, -1.0, 0.2), 0.0, MASTER_ORIENTED_MAX).unwrap();
        assert_eq!(w.diag(), Vec3::new(0.5, 0.0, 0.2));
    }

    proptest! {
        #[test]
        fn blend_is_convex(w in 0.0f64..=1.0, a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let x = arbitrate(&ArbitrationWeights::uniform(w).unwrap(), &st([a; 3]), &st([b; 3]));
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(x.pos.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
        }
    }
}
