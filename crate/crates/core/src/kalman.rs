//! Per-axis linear Kalman filtering.
//!
//! Each Cartesian axis carries a 3-state (position, velocity, acceleration)
//! constant-jerk model observed through its position only. The same filter
//! serves three roles in the framework: fusing the two master operators'
//! commands, smoothing the co-pilot's command, and tracking the slave state
//! on the master side so the force estimator can run without delay.
//!
//! The covariance `p` stored in a filter is always the *prior* covariance
//! of the next prediction, so one control step is `predict` followed by one
//! `correct` (or `fuse_dual`), which folds in the measurement(s) and
//! propagates the covariance through the model.

use nalgebra::{Matrix3, RowVector3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{CartesianState, Vec3};

/// Prior covariance used when nothing is known about the initial state.
pub const DIFFUSE_PRIOR: f64 = 1e15;
/// Observation noise variance of the master-side filters (m²).
pub const DEFAULT_MEASUREMENT_VAR: f64 = 1e-6;
/// Spectral density of the constant-jerk process noise.
pub const DEFAULT_JERK_DENSITY: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum KalmanError {
    #[error("correct called without a preceding predict")]
    NoPrediction,
    #[error("innovation variance {0} is not positive")]
    SingularInnovation(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("non-finite measurement {0}")]
    NonFiniteMeasurement(f64),
}

/// Linear Gaussian process/observation model for one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianLinearModel {
    pub a: Matrix3<f64>,
    pub c: RowVector3<f64>,
    pub w: Matrix3<f64>,
    pub r: f64,
}

impl GaussianLinearModel {
    pub fn new(a: Matrix3<f64>, c: RowVector3<f64>, w: Matrix3<f64>, r: f64) -> Result<Self, KalmanError> {
        let model = Self { a, c, w, r };
        model.validate()?;
        Ok(model)
    }

    /// Constant-jerk model sampled every `dt` seconds, position observed.
    ///
    /// `W = q·g·gᵀ` with `g = [dt³/6, dt²/2, dt]`.
    pub fn constant_jerk(dt: f64, q: f64, r: f64) -> Result<Self, KalmanError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(KalmanError::InvalidModel(format!("dt must be positive, got {dt}")));
        }
        #[rustfmt::skip]
        let a = Matrix3::new(
            1.0, dt, dt * dt / 2.0,
            0.0, 1.0, dt,
            0.0, 0.0, 1.0,
        );
        let g = Vector3::new(dt.powi(3) / 6.0, dt * dt / 2.0, dt);
        let w = g * g.transpose() * q;
        Self::new(a, RowVector3::new(1.0, 0.0, 0.0), w, r)
    }

    pub fn validate(&self) -> Result<(), KalmanError> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(KalmanError::InvalidModel(format!("R must be positive, got {}", self.r)));
        }
        let all_finite = self.a.iter().chain(self.w.iter()).chain(self.c.iter()).all(|v| v.is_finite());
        if !all_finite {
            return Err(KalmanError::InvalidModel("non-finite matrix entry".into()));
        }
        let scale = self.w.amax().max(f64::MIN_POSITIVE);
        if (self.w - self.w.transpose()).amax() > 1e-12 * scale {
            return Err(KalmanError::InvalidModel("W is not symmetric".into()));
        }
        let min_eig = self.w.symmetric_eigenvalues().min();
        if min_eig < -1e-12 * scale {
            return Err(KalmanError::InvalidModel(format!("W is not positive semi-definite (eigenvalue {min_eig})")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KalmanFilter {
    pub model: GaussianLinearModel,
    x_hat: Vector3<f64>,
    p: Matrix3<f64>,
    k: Vector3<f64>,
    prior: Option<Vector3<f64>>,
}

impl KalmanFilter {
    pub fn new(model: GaussianLinearModel, x0: Vector3<f64>, p0: Matrix3<f64>) -> Self {
        Self { model, x_hat: x0, p: p0, k: Vector3::zeros(), prior: None }
    }

    /// Zero initial state with a diffuse prior, so the first measurement dominates.
    pub fn diffuse(model: GaussianLinearModel) -> Self {
        Self::new(model, Vector3::zeros(), Matrix3::identity() * DIFFUSE_PRIOR)
    }

    pub fn estimate(&self) -> Vector3<f64> {
        self.x_hat
    }

    pub fn covariance(&self) -> &Matrix3<f64> {
        &self.p
    }

    pub fn gain(&self) -> Vector3<f64> {
        self.k
    }

    /// `X* = A·x̂`. Stores the prior for the following correction.
    pub fn predict(&mut self) -> Vector3<f64> {
        let prior = self.model.a * self.x_hat;
        self.prior = Some(prior);
        prior
    }

    /// Folds one scalar measurement into the pending prediction.
    pub fn correct(&mut self, z: f64) -> Result<Vector3<f64>, KalmanError> {
        self.correct_many(&[z])
    }

    /// Two sequential scalar corrections sharing one prediction.
    pub fn fuse_dual(&mut self, z1: f64, z2: f64) -> Result<Vector3<f64>, KalmanError> {
        self.correct_many(&[z1, z2])
    }

    fn correct_many(&mut self, zs: &[f64]) -> Result<Vector3<f64>, KalmanError> {
        let prior = self.prior.ok_or(KalmanError::NoPrediction)?;
        if let Some(&z) = zs.iter().find(|z| !z.is_finite()) {
            return Err(KalmanError::NonFiniteMeasurement(z));
        }
        let c = self.model.c;
        let r = self.model.r;
        let mut x = prior;
        let mut p = self.p;
        for &z in zs {
            let s = (c * p * c.transpose())[(0, 0)] + r;
            if !(s > 0.0 && s.is_finite()) {
                return Err(KalmanError::SingularInnovation(s));
            }
            let k = p * c.transpose() / s;
            x += k * (z - (c * x)[(0, 0)]);
            // Joseph form keeps P symmetric PSD even with a 1e15 prior.
            let i_kc = Matrix3::identity() - k * c;
            p = i_kc * p * i_kc.transpose() + k * k.transpose() * r;
            self.k = k;
        }
        let a = self.model.a;
        let p_next = a * p * a.transpose() + self.model.w;
        self.p = (p_next + p_next.transpose()) * 0.5;
        self.x_hat = x;
        self.prior = None;
        Ok(x)
    }

    /// `Aⁿ·x̂` without touching the filter.
    pub fn extrapolate(&self, steps: usize) -> Vector3<f64> {
        let mut x = self.x_hat;
        for _ in 0..steps {
            x = self.model.a * x;
        }
        x
    }
}

/// One independent filter per Cartesian axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisFilters {
    axes: [KalmanFilter; 3],
}

impl AxisFilters {
    pub fn diffuse(model: GaussianLinearModel) -> Self {
        Self { axes: std::array::from_fn(|_| KalmanFilter::diffuse(model.clone())) }
    }

    pub fn axis(&self, i: usize) -> &KalmanFilter {
        &self.axes[i]
    }

    /// Predict + correct on every axis with a measured position.
    pub fn track(&mut self, z: &Vec3) -> Result<CartesianState, KalmanError> {
        let mut out = CartesianState::default();
        for (i, f) in self.axes.iter_mut().enumerate() {
            f.predict();
            let x = f.correct(z[i])?;
            out.set_axis(i, [x[0], x[1], x[2]]);
        }
        Ok(out)
    }

    /// Predict + dual correction on every axis.
    pub fn fuse(&mut self, z1: &Vec3, z2: &Vec3) -> Result<CartesianState, KalmanError> {
        let mut out = CartesianState::default();
        for (i, f) in self.axes.iter_mut().enumerate() {
            f.predict();
            let x = f.fuse_dual(z1[i], z2[i])?;
            out.set_axis(i, [x[0], x[1], x[2]]);
        }
        Ok(out)
    }

    pub fn estimate(&self) -> CartesianState {
        let axes = std::array::from_fn(|i| {
            let x = self.axes[i].estimate();
            [x[0], x[1], x[2]]
        });
        CartesianState::from_axes(axes)
    }

    /// The estimate pushed `steps` control periods into the future.
    pub fn extrapolate(&self, steps: usize) -> CartesianState {
        let axes = std::array::from_fn(|i| {
            let x = self.axes[i].extrapolate(steps);
            [x[0], x[1], x[2]]
        });
        CartesianState::from_axes(axes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn identity_model() -> GaussianLinearModel {
        GaussianLinearModel::new(Matrix3::identity(), RowVector3::new(1.0, 0.0, 0.0), Matrix3::identity() * 1e-4, 1e-2)
            .unwrap()
    }

    #[test]
    fn predict_identity_transition() {
        let mut f = KalmanFilter::new(identity_model(), Vector3::new(1.0, 0.0, 0.0), Matrix3::identity());
        assert_eq!(f.predict(), Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn predict_with_millisecond_template() {
        let model = GaussianLinearModel::constant_jerk(1e-3, 1.0, 1e-6).unwrap();
        assert_eq!(model.a[(0, 1)], 1e-3);
        assert_eq!(model.a[(0, 2)], 1e-6 / 2.0);
        let mut f = KalmanFilter::new(model, Vector3::new(0.0, 1.0, 0.0), Matrix3::identity());
        let x = f.predict();
        assert!((x - Vector3::new(1e-3, 1.0, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn predict_matches_dense_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = Matrix3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let x0 = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let model = GaussianLinearModel { a, ..identity_model() };
            let mut f = KalmanFilter::new(model, x0, Matrix3::identity());
            let got = f.predict();
            for r in 0..3 {
                let want: f64 = (0..3).map(|c| a[(r, c)] * x0[c]).sum();
                assert!((got[r] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn correct_ignores_hopeless_measurement() {
        let mut model = GaussianLinearModel::constant_jerk(0.01, 1.0, 1e15).unwrap();
        model.r = 1e15;
        let mut f = KalmanFilter::new(model, Vector3::new(0.3, 0.1, -0.2), Matrix3::identity());
        let prior = f.predict();
        let x = f.correct(123.0).unwrap();
        assert!((x - prior).norm() < 1e-6 * prior.norm());
    }

    #[test]
    fn diffuse_prior_trusts_first_measurement() {
        let model = GaussianLinearModel::constant_jerk(0.01, DEFAULT_JERK_DENSITY, DEFAULT_MEASUREMENT_VAR).unwrap();
        let mut f = KalmanFilter::diffuse(model);
        f.predict();
        let x = f.correct(0.4321).unwrap();
        assert!((x[0] - 0.4321).abs() < 1e-6);
        assert!(f.gain().iter().all(|k| k.is_finite()));
    }

    #[test]
    fn correct_without_predict_is_rejected() {
        let mut f = KalmanFilter::diffuse(identity_model());
        assert_eq!(f.correct(1.0), Err(KalmanError::NoPrediction));
    }

    #[test]
    fn non_positive_r_is_rejected() {
        assert!(GaussianLinearModel::constant_jerk(0.01, 1.0, 0.0).is_err());
        let mut m = identity_model();
        m.w[(0, 0)] = -1.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn w_with_halved_corner_is_indefinite() {
        let dt: f64 = 0.01;
        #[rustfmt::skip]
        let w = Matrix3::new(
            dt.powi(6) / 36.0, dt.powi(5) / 12.0, dt.powi(4) / 6.0,
            dt.powi(5) / 12.0, dt.powi(4) / 4.0, dt.powi(3) / 2.0,
            dt.powi(4) / 6.0, dt.powi(3) / 2.0, dt.powi(2) / 2.0,
        );
        let m = GaussianLinearModel { w, ..GaussianLinearModel::constant_jerk(dt, 1.0, 1e-6).unwrap() };
        assert!(m.validate().is_err());
    }

    #[test]
    fn agreeing_measurements_converge() {
        let model = GaussianLinearModel::constant_jerk(0.01, 1.0, 1e-6).unwrap();
        let mut f = KalmanFilter::diffuse(model);
        for _ in 0..2000 {
            f.predict();
            f.fuse_dual(0.25, 0.25).unwrap();
        }
        assert!((f.estimate()[0] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn offset_measurements_are_contained() {
        let model = GaussianLinearModel::constant_jerk(0.01, 1.0, 1e-6).unwrap();
        let mut f = KalmanFilter::diffuse(model);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 1e-3).unwrap();
        let (lo, hi) = (0.1, 0.14);
        for _ in 0..1000 {
            f.predict();
            f.fuse_dual(lo + noise.sample(&mut rng), hi + noise.sample(&mut rng)).unwrap();
        }
        let x = f.estimate()[0];
        assert!(x > lo && x < hi, "{x}");
        assert!((x - 0.12).abs() < 5e-3);
    }

    #[test]
    fn fusion_order_does_not_matter() {
        let model = GaussianLinearModel::constant_jerk(0.01, 1.0, 1e-6).unwrap();
        let mut fa = KalmanFilter::diffuse(model.clone());
        let mut fb = KalmanFilter::diffuse(model);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..500 {
            let t = i as f64 * 0.01;
            let z1 = (t).sin() + rng.random_range(-1e-3..1e-3);
            let z2 = (t).sin() + 0.01 + rng.random_range(-1e-3..1e-3);
            fa.predict();
            fb.predict();
            let xa = fa.fuse_dual(z1, z2).unwrap();
            let xb = fb.fuse_dual(z2, z1).unwrap();
            assert!((xa - xb).amax() < 1e-9, "step {i}: {}", (xa - xb).amax());
        }
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let model = GaussianLinearModel::constant_jerk(0.01, 1.0, 1e-6).unwrap();
            let mut f = KalmanFilter::diffuse(model);
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..300)
                .map(|_| {
                    f.predict();
                    f.correct(rng.random_range(-1.0..1.0)).unwrap()
                })
                .collect::<Vec<_>>()
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits())));
    }

    #[test]
    fn extrapolation_applies_transition_repeatedly() {
        let model = GaussianLinearModel::constant_jerk(0.01, 1.0, 1e-6).unwrap();
        let f = KalmanFilter::new(model, Vector3::new(0.0, 1.0, 2.0), Matrix3::identity());
        let x = f.extrapolate(50);
        // constant acceleration over 0.5 s
        assert!((x[0] - (0.5 + 0.5 * 2.0 * 0.25)).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn axis_filters_track_each_axis() {
        let model = GaussianLinearModel::constant_jerk(0.01, 1.0, 1e-6).unwrap();
        let mut filters = AxisFilters::diffuse(model);
        let mut s = CartesianState::default();
        for _ in 0..100 {
            s = filters.track(&Vec3::new(1.0, -2.0, 3.0)).unwrap();
        }
        assert!((s.pos - Vec3::new(1.0, -2.0, 3.0)).amax() < 1e-9);
        assert_eq!(filters.estimate(), s);
    }
}
