//! Subtractive clustering for the rule count, then fuzzy c-means.

use serde::{Deserialize, Serialize};

use super::FuzzyError;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtractiveParams {
    /// Neighbourhood radius `r_a`, in data units.
    pub radius: f64,
    /// `r_b = squash·r_a`.
    pub squash: f64,
    pub accept_ratio: f64,
    pub reject_ratio: f64,
}

impl SubtractiveParams {
    pub fn with_radius(radius: f64) -> Self {
        Self { radius, squash: 1.5, accept_ratio: 0.5, reject_ratio: 0.15 }
    }
}

/// Mountain-style subtractive clustering. Returns the selected centers
/// (data points), whose count is the number of rules.
pub fn subtractive_clustering(data: &[Vec<f64>], params: &SubtractiveParams) -> Result<Vec<Vec<f64>>, FuzzyError> {
    if data.is_empty() {
        return Err(FuzzyError::EmptyData);
    }
    if !(params.radius > 0.0 && params.squash > 0.0) {
        return Err(FuzzyError::Invalid(format!(
            "radius {} and squash {} must be positive",
            params.radius, params.squash
        )));
    }
    let alpha = 4.0 / params.radius.powi(2);
    let beta = 4.0 / (params.squash * params.radius).powi(2);
    let n = data.len();
    let mut potential: Vec<f64> =
        (0..n).map(|i| (0..n).map(|j| (-alpha * sq_dist(&data[i], &data[j])).exp()).sum()).collect();

    let argmax = |p: &[f64]| {
        p.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
    };
    let (first, first_peak) = argmax(&potential);
    let mut centers = vec![first];
    let mut last = (first, first_peak);
    loop {
        let (k, pk) = last;
        for (i, p) in potential.iter_mut().enumerate() {
            *p -= pk * (-beta * sq_dist(&data[i], &data[k])).exp();
        }
        // keep probing candidates until one is accepted or the search stops
        loop {
            let (c, pc) = argmax(&potential);
            if pc > params.accept_ratio * first_peak {
                centers.push(c);
                last = (c, pc);
                break;
            }
            if pc < params.reject_ratio * first_peak {
                return Ok(centers.into_iter().map(|i| data[i].clone()).collect());
            }
            let d_min = centers.iter().map(|&j| sq_dist(&data[c], &data[j]).sqrt()).fold(f64::INFINITY, f64::min);
            if d_min / params.radius + pc / first_peak >= 1.0 {
                centers.push(c);
                last = (c, pc);
                break;
            }
            potential[c] = 0.0;
        }
    }
}

/// Fuzzy memberships of `x` in each cluster for fuzzifier `m`.
///
/// A point sitting exactly on a center belongs to it alone.
pub fn memberships(x: &[f64], centers: &[Vec<f64>], m: f64) -> Vec<f64> {
    let d2: Vec<f64> = centers.iter().map(|c| sq_dist(x, c)).collect();
    if let Some(hit) = d2.iter().position(|&d| d == 0.0) {
        let mut u = vec![0.0; centers.len()];
        u[hit] = 1.0;
        return u;
    }
    // 1 / Σ_k (d_j/d_k)^(2/(m−1)), computed as a normalized (d_min²/d_j²)^(1/(m−1))
    let e = 1.0 / (m - 1.0);
    let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let inv: Vec<f64> = d2.iter().map(|&dj| (dmin / dj).powf(e)).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|v| v / total).collect()
}

/// `Σ_i Σ_j u_ij^m·‖x_i − c_j‖²`.
pub fn fcm_objective(data: &[Vec<f64>], centers: &[Vec<f64>], u: &[Vec<f64>], m: f64) -> f64 {
    data.iter()
        .zip(u)
        .map(|(x, row)| row.iter().zip(centers).map(|(uij, c)| uij.powf(m) * sq_dist(x, c)).sum::<f64>())
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcmParams {
    pub m: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FcmParams {
    fn default() -> Self {
        Self { m: 2.0, tol: 1e-6, max_iter: 200 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FcmResult {
    pub centers: Vec<Vec<f64>>,
    /// `N × p`.
    pub memberships: Vec<Vec<f64>>,
    /// Objective after each membership update; non-increasing.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FcmResult {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().unwrap()
    }
}

/// Alternating membership/center updates from `seeds` until the largest
/// center shift drops below `tol`.
pub fn fcm(data: &[Vec<f64>], seeds: &[Vec<f64>], params: &FcmParams) -> Result<FcmResult, FuzzyError> {
    let p = seeds.len();
    if data.is_empty() {
        return Err(FuzzyError::EmptyData);
    }
    if p == 0 || p > data.len() {
        return Err(FuzzyError::TooManyClusters { clusters: p, points: data.len() });
    }
    if !(params.m > 1.0) {
        return Err(FuzzyError::Invalid(format!("fuzzifier m = {} must exceed 1", params.m)));
    }
    let m = params.m;
    let dim = data[0].len();
    let mut centers = seeds.to_vec();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let u: Vec<Vec<f64>> = data.iter().map(|x| memberships(x, &centers, m)).collect();
        history.push(fcm_objective(data, &centers, &u, m));
        let mut next = vec![vec![0.0; dim]; p];
        let mut weight = vec![0.0; p];
        for (x, row) in data.iter().zip(&u) {
            for j in 0..p {
                let w = row[j].powf(m);
                weight[j] += w;
                for (acc, v) in next[j].iter_mut().zip(x) {
                    *acc += w * v;
                }
            }
        }
        for (c, w) in next.iter_mut().zip(&weight) {
            if *w > 0.0 {
                c.iter_mut().for_each(|v| *v /= w);
            }
        }
        // a cluster with no weight keeps its old center
        for j in 0..p {
            if weight[j] == 0.0 {
                next[j] = centers[j].clone();
            }
        }
        let shift = centers.iter().zip(&next).map(|(a, b)| sq_dist(a, b).sqrt()).fold(0.0, f64::max);
        centers = next;
        if shift < params.tol {
            converged = true;
            break;
        }
    }
    // memberships and objective consistent with the final centers
    let u: Vec<Vec<f64>> = data.iter().map(|x| memberships(x, &centers, m)).collect();
    history.push(fcm_objective(data, &centers, &u, m));
    Ok(FcmResult { centers, memberships: u, objective_history: history, iterations, converged })
}
