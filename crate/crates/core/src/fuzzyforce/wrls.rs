use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FuzzyError;

/// Initial covariance scale of an uninformed rule.
pub const DEFAULT_S0: f64 = 1e6;

/// One T-S rule: antecedent center plus a linear consequent `F = M·[1, x]`
/// estimated by recursive least squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub center: Vec<f64>,
    pub spread: Vec<f64>,
    /// `outputs × (inputs + 1)`.
    pub consequent: DMatrix<f64>,
    /// `(inputs + 1) × (inputs + 1)`.
    pub covariance: DMatrix<f64>,
}

impl FuzzyRule {
    pub fn new(center: Vec<f64>, spread: Vec<f64>, inputs: usize, outputs: usize, s0: f64) -> Self {
        Self {
            center,
            spread,
            consequent: DMatrix::zeros(outputs, inputs + 1),
            covariance: DMatrix::identity(inputs + 1, inputs + 1) * s0,
        }
    }

    pub fn output(&self, x_aug: &DVector<f64>) -> DVector<f64> {
        &self.consequent * x_aug
    }
}

/// `[1, x]`.
pub fn augment(x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len() + 1, std::iter::once(1.0).chain(x.iter().copied()))
}

/// One recursive least-squares step with forgetting factor `sigma`:
///
/// ```text
/// K = S·x / (σ + xᵀ·S·x)
/// M ← M + (f − M·x)·Kᵀ
/// S ← (S − S·x·xᵀ·S / (σ + xᵀ·S·x)) / σ
/// ```
pub fn wrls_update(rule: &mut FuzzyRule, x_aug: &DVector<f64>, f: &DVector<f64>, sigma: f64) -> Result<(), FuzzyError> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(FuzzyError::Invalid(format!("forgetting factor {sigma} not in (0, 1]")));
    }
    if !x_aug.iter().chain(f.iter()).all(|v| v.is_finite()) {
        return Err(FuzzyError::NonFinite);
    }
    let sx = &rule.covariance * x_aug;
    let denom = sigma + x_aug.dot(&sx);
    let gain = &sx / denom;
    let innovation = f - &rule.consequent * x_aug;
    rule.consequent += &innovation * gain.transpose();
    let s = (&rule.covariance - &sx * sx.transpose() / denom) / sigma;
    rule.covariance = (&s + s.transpose()) * 0.5;
    Ok(())
}
