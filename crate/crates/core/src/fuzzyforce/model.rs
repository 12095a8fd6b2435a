use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cluster::{fcm, memberships, subtractive_clustering, FcmParams, SubtractiveParams};
use super::preprocess::PreprocessModel;
use super::wrls::{augment, wrls_update, FuzzyRule, DEFAULT_S0};
use super::FuzzyError;
use crate::checkpoint::{Checkpoint, CheckpointError, Section};
use crate::state::{CartesianState, Vec3};

/// Which components of the filtered slave state feed the estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFeatures {
    pub axis: usize,
    pub velocity: bool,
    pub acceleration: bool,
}

impl Default for StateFeatures {
    fn default() -> Self {
        Self { axis: 2, velocity: true, acceleration: false }
    }
}

impl StateFeatures {
    pub fn extract(&self, s: &CartesianState) -> Vec<f64> {
        let mut f = vec![s.pos[self.axis]];
        if self.velocity {
            f.push(s.vel[self.axis]);
        }
        if self.acceleration {
            f.push(s.acc[self.axis]);
        }
        f
    }

    pub fn dim(&self) -> usize {
        1 + self.velocity as usize + self.acceleration as usize
    }
}

/// One labelled training sample: filtered slave state, measured force, material class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    pub state: CartesianState,
    pub force: Vec3,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzyConfig {
    pub features: StateFeatures,
    /// Fuzzifier, `> 1`.
    pub m: f64,
    /// Relative half-width of the footprint of uncertainty.
    pub fou_delta: f64,
    pub b_lower: f64,
    pub b_upper: f64,
    /// WRLS forgetting factor in `(0, 1]`.
    pub sigma: f64,
    pub cluster: SubtractiveParams,
    pub fcm_tol: f64,
    pub fcm_max_iter: usize,
    /// A rule's consequent only learns from samples firing it above this.
    pub wrls_gate: f64,
    pub s0: f64,
    pub passes: usize,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            features: StateFeatures::default(),
            m: 2.0,
            fou_delta: 0.1,
            b_lower: 0.5,
            b_upper: 0.5,
            sigma: 1.0,
            cluster: SubtractiveParams::with_radius(1.5),
            fcm_tol: 1e-6,
            fcm_max_iter: 200,
            wrls_gate: 0.05,
            s0: DEFAULT_S0,
            passes: 1,
        }
    }
}

impl FuzzyConfig {
    pub fn validate(&self) -> Result<(), FuzzyError> {
        let bad = |m: String| Err(FuzzyError::Invalid(m));
        if !(self.m > 1.0) {
            return bad(format!("fuzzifier m = {} must exceed 1", self.m));
        }
        if !(0.0..=1.0).contains(&self.fou_delta) {
            return bad(format!("fou_delta = {} not in [0, 1]", self.fou_delta));
        }
        if !(self.b_lower >= 0.0 && self.b_upper >= 0.0 && ((self.b_lower + self.b_upper) - 1.0).abs() < 1e-12) {
            return bad(format!(
                "b_lower = {} and b_upper = {} must be non-negative and sum to 1",
                self.b_lower, self.b_upper
            ));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return bad(format!("sigma = {} not in (0, 1]", self.sigma));
        }
        if self.features.axis > 2 || self.passes == 0 || !(self.s0 > 0.0) {
            return bad("feature axis must be 0..=2, passes >= 1 and s0 > 0".into());
        }
        Ok(())
    }

    fn to_section(&self, name: &str) -> Section {
        let mut s = Section::new(name);
        s.push_usizes(
            "features",
            &[self.features.axis, self.features.velocity as usize, self.features.acceleration as usize],
        );
        s.push_f64("m", self.m);
        s.push_f64("fou_delta", self.fou_delta);
        s.push_floats("b", &[self.b_lower, self.b_upper]);
        s.push_f64("sigma", self.sigma);
        s.push_floats(
            "cluster",
            &[self.cluster.radius, self.cluster.squash, self.cluster.accept_ratio, self.cluster.reject_ratio],
        );
        s.push_f64("fcm_tol", self.fcm_tol);
        s.push_usizes("fcm_max_iter", &[self.fcm_max_iter]);
        s.push_f64("wrls_gate", self.wrls_gate);
        s.push_f64("s0", self.s0);
        s.push_usizes("passes", &[self.passes]);
        s
    }

    fn from_section(s: &Section) -> Result<Self, CheckpointError> {
        let f = s.usizes("features")?;
        if f.len() != 3 {
            return Err(s.bad("features", "expected axis, velocity, acceleration".into()));
        }
        let b = s.floats_len("b", 2)?;
        let c = s.floats_len("cluster", 4)?;
        Ok(Self {
            features: StateFeatures { axis: f[0], velocity: f[1] != 0, acceleration: f[2] != 0 },
            m: s.f64("m")?,
            fou_delta: s.f64("fou_delta")?,
            b_lower: b[0],
            b_upper: b[1],
            sigma: s.f64("sigma")?,
            cluster: SubtractiveParams { radius: c[0], squash: c[1], accept_ratio: c[2], reject_ratio: c[3] },
            fcm_tol: s.f64("fcm_tol")?,
            fcm_max_iter: s.usize("fcm_max_iter")?,
            wrls_gate: s.f64("wrls_gate")?,
            s0: s.f64("s0")?,
            passes: s.usize("passes")?,
        })
    }
}

/// Diagnostics from [`FuzzyModel::train`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub rules: usize,
    pub fcm_iterations: usize,
    pub fcm_objective: Vec<f64>,
    /// Force RMSE of the final model over the training samples.
    pub train_rmse: f64,
    pub updates_per_rule: Vec<usize>,
}

/// Interval type-2 Takagi–Sugeno force model.
#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyModel {
    pub config: FuzzyConfig,
    pub preprocess: PreprocessModel,
    pub rules: Vec<FuzzyRule>,
}

impl FuzzyModel {
    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.rules.iter().map(|r| r.center.clone()).collect()
    }

    /// Type-1 memberships of a raw feature vector.
    pub fn crisp_memberships(&self, features: &[f64]) -> Vec<f64> {
        memberships(&self.preprocess.apply(features), &self.centers(), self.config.m)
    }

    /// `[ω̲_j, ω̄_j]` per rule.
    pub fn firing_interval(&self, features: &[f64]) -> Vec<(f64, f64)> {
        let d = self.config.fou_delta;
        self.crisp_memberships(features).into_iter().map(|w| ((1.0 - d) * w, ((1.0 + d) * w).min(1.0))).collect()
    }

    /// `ω̃_j = b̲·ω̲_j + b̄·ω̄_j`.
    pub fn combined_firing(&self, features: &[f64]) -> Vec<f64> {
        let (bl, bu) = (self.config.b_lower, self.config.b_upper);
        self.firing_interval(features).into_iter().map(|(lo, hi)| bl * lo + bu * hi).collect()
    }

    /// Normalized firing-weighted blend of the rule consequents.
    pub fn predict_features(&self, features: &[f64]) -> Result<Vec3, FuzzyError> {
        if features.len() != self.preprocess.input_dim() {
            return Err(FuzzyError::Invalid(format!(
                "expected {} features, got {}",
                self.preprocess.input_dim(),
                features.len()
            )));
        }
        let firing = self.combined_firing(features);
        let total: f64 = firing.iter().sum();
        if !(total > 0.0) {
            return Err(FuzzyError::OutOfDomain);
        }
        let x = augment(&self.preprocess.zscore(features));
        let mut f = DVector::zeros(3);
        for (rule, w) in self.rules.iter().zip(&firing) {
            f += rule.output(&x) * *w;
        }
        f /= total;
        Ok(Vec3::new(f[0], f[1], f[2]))
    }

    pub fn predict_force(&self, x_hat_s: &CartesianState) -> Result<Vec3, FuzzyError> {
        self.predict_features(&self.config.features.extract(x_hat_s))
    }

    /// Normalize and project, cluster, then stream every sample through
    /// the per-rule recursive least-squares updates.
    pub fn train(samples: &[ForceSample], config: &FuzzyConfig) -> Result<(Self, TrainSummary), FuzzyError> {
        config.validate()?;
        if samples.is_empty() {
            return Err(FuzzyError::EmptyData);
        }
        let features: Vec<Vec<f64>> = samples.iter().map(|s| config.features.extract(&s.state)).collect();
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        let preprocess = PreprocessModel::fit(&features, &labels)?;
        let projected: Vec<Vec<f64>> = features.iter().map(|x| preprocess.apply(x)).collect();

        let seeds = subtractive_clustering(&projected, &config.cluster)?;
        let fcm_params = FcmParams { m: config.m, tol: config.fcm_tol, max_iter: config.fcm_max_iter };
        let clusters = fcm(&projected, &seeds, &fcm_params)?;

        let inputs = preprocess.input_dim();
        let rules = clusters
            .centers
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let mut num = vec![0.0; c.len()];
                let mut den = 0.0;
                for (x, u) in projected.iter().zip(&clusters.memberships) {
                    let w = u[j].powf(config.m);
                    den += w;
                    for (acc, (xi, ci)) in num.iter_mut().zip(x.iter().zip(c)) {
                        *acc += w * (xi - ci).powi(2);
                    }
                }
                let spread = num.iter().map(|v| (v / den.max(f64::MIN_POSITIVE)).sqrt().max(1e-12)).collect();
                FuzzyRule::new(c.clone(), spread, inputs, 3, config.s0)
            })
            .collect();
        let mut model = Self { config: config.clone(), preprocess, rules };

        let mut updates = vec![0; model.rules.len()];
        for _ in 0..config.passes {
            for (sample, x) in samples.iter().zip(&features) {
                let x_aug = augment(&model.preprocess.zscore(x));
                let target = DVector::from_column_slice(sample.force.as_slice());
                let firing = model.combined_firing(x);
                for (j, w) in firing.iter().enumerate() {
                    if *w > config.wrls_gate {
                        wrls_update(&mut model.rules[j], &x_aug, &target, config.sigma)?;
                        updates[j] += 1;
                    }
                }
            }
        }

        let mut sq = 0.0;
        for (sample, x) in samples.iter().zip(&features) {
            sq += (model.predict_features(x)? - sample.force).norm_squared();
        }
        let summary = TrainSummary {
            rules: model.rules.len(),
            fcm_iterations: clusters.iterations,
            fcm_objective: clusters.objective_history,
            train_rmse: (sq / samples.len() as f64).sqrt(),
            updates_per_rule: updates,
        };
        Ok((model, summary))
    }

    pub fn write_sections(&self, doc: &mut Checkpoint) {
        doc.push(self.config.to_section("fuzzy.config"));
        doc.push(self.preprocess.to_section("fuzzy.preprocess"));
        for (j, r) in self.rules.iter().enumerate() {
            let mut s = Section::new(format!("fuzzy.rule.{j}"));
            s.push_floats("center", &r.center);
            s.push_floats("spread", &r.spread);
            s.push_usizes("consequent_shape", &[r.consequent.nrows(), r.consequent.ncols()]);
            s.push_floats("consequent", r.consequent.as_slice());
            s.push_floats("covariance", r.covariance.as_slice());
            doc.push(s);
        }
    }

    pub fn read_sections(doc: &Checkpoint) -> Result<Self, FuzzyError> {
        let config = FuzzyConfig::from_section(doc.section("fuzzy.config")?)?;
        config.validate()?;
        let preprocess = PreprocessModel::from_section(doc.section("fuzzy.preprocess")?)?;
        let mut rules = Vec::new();
        for s in doc.sections_with_prefix("fuzzy.rule") {
            let shape = s.usizes("consequent_shape")?;
            if shape.len() != 2 || shape[1] != preprocess.input_dim() + 1 || shape[0] != 3 {
                return Err(CheckpointError::BadValue {
                    section: s.name.clone(),
                    key: "consequent_shape".into(),
                    msg: format!("{shape:?} does not match the feature count"),
                }
                .into());
            }
            let k = shape[1];
            let center = s.floats_len("center", preprocess.projected_dim())?;
            rules.push(FuzzyRule {
                spread: s.floats_len("spread", center.len())?,
                center,
                consequent: DMatrix::from_vec(shape[0], k, s.floats_len("consequent", shape[0] * k)?),
                covariance: DMatrix::from_vec(k, k, s.floats_len("covariance", k * k)?),
            });
        }
        if rules.is_empty() {
            return Err(CheckpointError::MissingSection("fuzzy.rule.0".into()).into());
        }
        Ok(Self { config, preprocess, rules })
    }
}
