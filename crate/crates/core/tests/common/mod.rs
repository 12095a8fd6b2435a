//! Independent reference implementations shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code, clippy::needless_range_loop)]

use std::time::Instant;

use mpteleop_core::channel::{Channel, ChannelConfig};
use mpteleop_core::ddpg::{DdpgAgent, DdpgConfig, Mlp, Transition};
use mpteleop_core::fuzzyforce::{augment, fcm, memberships, wrls_update, FcmParams, FuzzyModel, FuzzyRule};
use mpteleop_core::kalman::{GaussianLinearModel, KalmanFilter};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type M = [[f64; 3]; 3];

fn mat_mul(a: &M, b: &M) -> M {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn transpose(a: &M) -> M {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

fn to_array(m: &Matrix3<f64>) -> M {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Plain-array filter, observation of the first state: K = PCᵀ/(CPCᵀ + R),
/// x ← x + K(z − Cx), P ← (I − KC)P, then x ← Ax, P ← APAᵀ + W.
pub struct TextbookKf {
    a: M,
    w: M,
    r: f64,
    x: [f64; 3],
    p: M,
}

impl TextbookKf {
    pub fn step(&mut self, z: f64) -> [f64; 3] {
        let prior: [f64; 3] = std::array::from_fn(|i| (0..3).map(|k| self.a[i][k] * self.x[k]).sum());
        let s = self.p[0][0] + self.r;
        let k: [f64; 3] = std::array::from_fn(|i| self.p[i][0] / s);
        let innov = z - prior[0];
        let post: [f64; 3] = std::array::from_fn(|i| prior[i] + k[i] * innov);
        let mut p = self.p;
        for i in 0..3 {
            for j in 0..3 {
                p[i][j] = self.p[i][j] - k[i] * self.p[0][j];
            }
        }
        let mut next = mat_mul(&mat_mul(&self.a, &p), &transpose(&self.a));
        for i in 0..3 {
            for j in 0..3 {
                next[i][j] += self.w[i][j];
            }
        }
        self.x = post;
        self.p = next;
        post
    }
}

/// Largest elementwise gap between the library filter and the textbook one
/// over 100 noisy scalar measurements.
pub fn kf_max_gap() -> f64 {
    let model = GaussianLinearModel::constant_jerk(0.01, 0.5, 1e-4).unwrap();
    let x0 = Vector3::new(0.02, -0.1, 0.3);
    let p0 = Matrix3::new(2.0, 0.1, 0.0, 0.1, 1.0, 0.05, 0.0, 0.05, 0.5);
    let mut kf = KalmanFilter::new(model.clone(), x0, p0);
    let mut oracle = TextbookKf {
        a: to_array(&model.a),
        w: to_array(&model.w),
        r: model.r,
        x: [x0[0], x0[1], x0[2]],
        p: to_array(&p0),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::new(0.0, 1e-2).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let t = i as f64 * 0.01;
        let z = (2.0 * t).sin() * 0.1 + noise.sample(&mut rng);
        kf.predict();
        let got = kf.correct(z).unwrap();
        let want = oracle.step(z);
        for j in 0..3 {
            worst = worst.max((got[j] - want[j]).abs());
        }
    }
    worst
}

pub struct SteadyState {
    pub variance: f64,
    pub r: f64,
    pub seconds: f64,
}

/// Position error variance of the filter tracking a simulated jerk-driven
/// trajectory for 10⁴ steps, after a burn-in of 1000.
pub fn kf_steady_state() -> SteadyState {
    let started = Instant::now();
    let (dt, q, r) = (0.01, 1.0, 1e-6);
    let model = GaussianLinearModel::constant_jerk(dt, q, r).unwrap();
    let mut kf = KalmanFilter::diffuse(model.clone());
    let g = Vector3::new(dt.powi(3) / 6.0, dt * dt / 2.0, dt);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let unit = Normal::new(0.0, 1.0).unwrap();

    let mut truth = Vector3::new(0.1, 0.0, 0.0);
    let (mut sum, mut sum_sq, mut n) = (0.0, 0.0, 0usize);
    for i in 0..10_000 {
        truth = model.a * truth + g * (q.sqrt() * unit.sample(&mut rng));
        let z = truth[0] + r.sqrt() * unit.sample(&mut rng);
        kf.predict();
        let e = kf.correct(z).unwrap()[0] - truth[0];
        if i >= 1000 {
            sum += e;
            sum_sq += e * e;
            n += 1;
        }
    }
    let mean = sum / n as f64;
    SteadyState { variance: sum_sq / n as f64 - mean * mean, r, seconds: started.elapsed().as_secs_f64() }
}

pub const DT: f64 = 0.01;

/// Sends `values[k]` at tick `k` and records what the receiver sees at
/// every tick.
pub fn through_channel(values: &[f64], delay: f64) -> Vec<Option<f64>> {
    let mut ch = Channel::new(ChannelConfig::with_delay(delay)).unwrap();
    let mut seen = Vec::with_capacity(values.len());
    for (k, &v) in values.iter().enumerate() {
        let t = k as f64 * DT;
        ch.send(v, t).unwrap();
        seen.push(ch.recv_latest(t).map(|m| m.payload));
    }
    seen
}

pub fn shifted_by(values: &[f64], seen: &[Option<f64>], shift: usize) -> bool {
    seen.iter().enumerate().all(|(k, s)| *s == k.checked_sub(shift).map(|j| values[j]))
}

pub const FD_STEP: f64 = 1e-5;

pub fn batch(state_dim: usize, action_dim: usize, n: usize, seed: u64) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Transition {
            state: (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: (0..action_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            reward: rng.random_range(-2.0..10.0),
            next_state: (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect()
}

/// `|a − n| / max(|a|, |n|, floor)`. The floor sits at the round-off
/// level of a central difference of a function of size `f`.
pub fn relative_error(analytic: f64, numeric: f64, f: f64) -> f64 {
    let floor = 1e-6 * f.abs().max(1.0);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Largest relative gap between `analytic` and central differences of `f`
/// around `net`'s parameters.
pub fn fd_gap(net: &Mlp, analytic: &[f64], f: impl Fn(&Mlp) -> f64) -> f64 {
    let base = net.params();
    let f0 = f(net);
    assert_eq!(base.len(), analytic.len());
    let mut worst: f64 = 0.0;
    for (i, g) in analytic.iter().enumerate() {
        let mut plus = net.clone();
        let mut p = base.clone();
        p[i] += FD_STEP;
        plus.set_params(&p);
        let mut minus = net.clone();
        p[i] -= 2.0 * FD_STEP;
        minus.set_params(&p);
        let numeric = (f(&plus) - f(&minus)) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(*g, numeric, f0));
    }
    worst
}

pub fn agent(state_dim: usize, action_dim: usize, leaky_slope: f64, seed: u64) -> DdpgAgent {
    DdpgAgent::new(DdpgConfig { state_dim, action_dim, leaky_slope, seed, ..Default::default() }).unwrap()
}

/// (state, action) pairs of both agents, plain and leaky hidden units.
pub const GRADIENT_CASES: [(usize, usize, f64); 5] = [(2, 2, 0.0), (2, 1, 0.0), (2, 2, 0.01), (2, 1, 0.2), (6, 6, 0.0)];

/// Worst critic and actor gradient gaps for one case.
pub fn gradient_gaps(sd: usize, ad: usize, slope: f64, seed: u64) -> (f64, f64) {
    let a = agent(sd, ad, slope, 100 + seed);
    assert_eq!(a.critic.widths(), vec![sd + ad, 5, 5, 5, 2, 1]);
    assert_eq!(a.actor.widths(), vec![sd, 3, ad]);
    let b = batch(sd, ad, 16, seed);
    let targets = a.td_targets(&b);

    let (_, grad) = a.critic_loss_grad(&b, &targets);
    let critic = fd_gap(&a.critic, &grad.flat(), |net| {
        let mut probe = a.clone();
        probe.critic = net.clone();
        probe.critic_loss(&b, &targets)
    });

    let (_, grad) = a.actor_objective_grad(&b);
    let actor = fd_gap(&a.actor, &grad.flat(), |net| {
        let mut probe = a.clone();
        probe.actor = net.clone();
        probe.actor_objective(&b)
    });
    (critic, actor)
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// 30 points in three loose 2-D blobs.
pub fn blobs(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 0.35).unwrap();
    let centers = [[0.0, 0.0], [2.5, 0.5], [1.0, 2.2]];
    (0..30).map(|i| centers[i % 3].iter().map(|c| c + n.sample(&mut rng)).collect()).collect()
}

fn reference_memberships(x: &[f64], centers: &[Vec<f64>], m: f64) -> Vec<f64> {
    let d: Vec<f64> = centers.iter().map(|c| sq_dist(x, c).sqrt()).collect();
    (0..d.len())
        .map(|j| {
            if d[j] == 0.0 {
                return 1.0;
            }
            if d.contains(&0.0) {
                return 0.0;
            }
            1.0 / d.iter().map(|dk| (d[j] / dk).powf(2.0 / (m - 1.0))).sum::<f64>()
        })
        .collect()
}

/// Reference c-means: memberships by the ratio-sum form, centers by
/// `Σu^m·x / Σu^m`, a fixed number of sweeps. Returns the final objective.
pub fn reference_fcm(data: &[Vec<f64>], mut centers: Vec<Vec<f64>>, m: f64) -> f64 {
    let u_of =
        |centers: &[Vec<f64>]| -> Vec<Vec<f64>> { data.iter().map(|x| reference_memberships(x, centers, m)).collect() };
    for _ in 0..500 {
        let u = u_of(&centers);
        for (j, c) in centers.iter_mut().enumerate() {
            let w: Vec<f64> = u.iter().map(|row| row[j].powf(m)).collect();
            let total: f64 = w.iter().sum();
            for (k, ck) in c.iter_mut().enumerate() {
                *ck = data.iter().zip(&w).map(|(x, wi)| wi * x[k]).sum::<f64>() / total;
            }
        }
    }
    let u = u_of(&centers);
    data.iter()
        .zip(&u)
        .map(|(x, row)| row.iter().zip(&centers).map(|(uij, c)| uij.powf(m) * sq_dist(x, c)).sum::<f64>())
        .sum()
}

/// Smallest reference objective over 50 random initializations.
pub fn restart_minimum(data: &[Vec<f64>], clusters: usize, m: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    (0..50)
        .map(|_| {
            let init: Vec<Vec<f64>> =
                (0..clusters).map(|_| vec![rng.random_range(-1.0..3.5), rng.random_range(-1.0..3.0)]).collect();
            reference_fcm(data, init, m)
        })
        .fold(f64::INFINITY, f64::min)
}

pub struct FcmCheck {
    pub objective: f64,
    pub restart_min: f64,
    pub monotone: bool,
    pub worst_sum_gap: f64,
}

pub fn fcm_check() -> FcmCheck {
    let data = blobs(3);
    let m = 2.0;
    let seeds = vec![data[0].clone(), data[1].clone(), data[2].clone()];
    let r = fcm(&data, &seeds, &FcmParams { m, tol: 1e-9, max_iter: 1000 }).unwrap();
    let monotone = r.objective_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let mut worst_sum_gap: f64 = 0.0;
    for x in data.iter().chain(&r.centers) {
        worst_sum_gap = worst_sum_gap.max((memberships(x, &r.centers, m).iter().sum::<f64>() - 1.0).abs());
    }
    FcmCheck { objective: r.objective(), restart_min: restart_minimum(&data, 3, m), monotone, worst_sum_gap }
}

/// Relative Frobenius gap between a single rule trained by WRLS with
/// σ = 1 and the normal-equation solution on 200 noisy samples.
pub fn wrls_ols_gap() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let truth = DMatrix::from_row_slice(2, 4, &[0.5, -1.0, 2.0, 0.3, -0.2, 0.7, 0.0, 1.5]);
    let xs: Vec<DVector<f64>> = (0..200)
        .map(|_| augment(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
        .collect();
    let fs: Vec<DVector<f64>> =
        xs.iter().map(|x| &truth * x + DVector::from_fn(2, |_, _| noise.sample(&mut rng))).collect();

    let mut rule = FuzzyRule::new(vec![0.0], vec![1.0], 3, 2, 1e10);
    for (x, f) in xs.iter().zip(&fs) {
        wrls_update(&mut rule, x, f, 1.0).unwrap();
    }

    let a = DMatrix::from_fn(200, 4, |i, j| xs[i][j]);
    let b = DMatrix::from_fn(200, 2, |i, j| fs[i][j]);
    let ols = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * b)).transpose();
    (&rule.consequent - &ols).norm() / ols.norm()
}

/// Type-1 Takagi-Sugeno inference written out from the fitted pieces:
/// z-score, project, crisp c-means memberships, membership-weighted blend
/// of the affine consequents in z-score space.
pub fn type1_reference(model: &FuzzyModel, x: &[f64]) -> [f64; 3] {
    let pre = &model.preprocess;
    let z: Vec<f64> = x.iter().enumerate().map(|(i, v)| (v - pre.means[i]) / pre.stds[i]).collect();
    let proj: Vec<f64> =
        (0..pre.projection.ncols()).map(|c| (0..z.len()).map(|r| pre.projection[(r, c)] * z[r]).sum()).collect();
    let centers: Vec<Vec<f64>> = model.rules.iter().map(|r| r.center.clone()).collect();
    let u = reference_memberships(&proj, &centers, model.config.m);
    let mut out = [0.0; 3];
    for (rule, uj) in model.rules.iter().zip(&u) {
        for (k, o) in out.iter_mut().enumerate() {
            let y = rule.consequent[(k, 0)] + (0..z.len()).map(|i| rule.consequent[(k, i + 1)] * z[i]).sum::<f64>();
            *o += uj * y;
        }
    }
    let total: f64 = u.iter().sum();
    out.map(|v| v / total)
}

/// Largest relative gap between the model and [`type1_reference`].
pub fn type1_gap<'a>(model: &FuzzyModel, inputs: impl IntoIterator<Item = &'a Vec<f64>>) -> f64 {
    let mut worst: f64 = 0.0;
    for x in inputs {
        let got = model.predict_features(x).unwrap();
        let want = type1_reference(model, x);
        for k in 0..3 {
            worst = worst.max((got[k] - want[k]).abs() / want[k].abs().max(1.0));
        }
    }
    worst
}
