mod common;

use common::{blobs, sq_dist};
use mpteleop_core::fuzzyforce::{
    augment, fcm, fcm_objective, memberships, subtractive_clustering, wrls_update, FcmParams, ForceSample, FuzzyConfig,
    FuzzyModel, FuzzyRule, SubtractiveParams,
};
use mpteleop_core::{CartesianState, Vec3};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fcm_reaches_the_restart_minimum() {
    let c = common::fcm_check();
    assert!(c.objective <= c.restart_min * 1.01, "fcm {} vs restart minimum {}", c.objective, c.restart_min);
    assert!(c.monotone);
    assert!(c.worst_sum_gap < 1e-9);
}

#[test]
fn fcm_objective_never_increases() {
    for seed in 0..5 {
        let data = blobs(seed);
        let seeds: Vec<Vec<f64>> = data.iter().take(4).cloned().collect();
        for m in [1.2, 2.0, 3.0] {
            let r = fcm(&data, &seeds, &FcmParams { m, tol: 1e-10, max_iter: 300 }).unwrap();
            for w in r.objective_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "m = {m}: {} -> {}", w[0], w[1]);
            }
            let u: Vec<Vec<f64>> = data.iter().map(|x| memberships(x, &r.centers, m)).collect();
            let direct = fcm_objective(&data, &r.centers, &u, m);
            assert!(direct <= r.objective() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn memberships_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..2000 {
        let p = rng.random_range(1..8);
        let dim = rng.random_range(1..4);
        let centers: Vec<Vec<f64>> = (0..p).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let x: Vec<f64> = if rng.random_bool(0.1) {
            centers[0].clone()
        } else {
            (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect()
        };
        let m = rng.random_range(1.05..4.0);
        let u = memberships(&x, &centers, m);
        assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(u.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

/// Literal transcription of the mountain method: potentials from scratch
/// after every accepted center.
fn reference_subtractive(data: &[Vec<f64>], p: &SubtractiveParams) -> Vec<Vec<f64>> {
    let alpha = 4.0 / (p.radius * p.radius);
    let beta = 4.0 / (p.squash * p.radius).powi(2);
    let n = data.len();
    let base: Vec<f64> = (0..n).map(|i| (0..n).map(|j| (-alpha * sq_dist(&data[i], &data[j])).exp()).sum()).collect();
    let mut chosen: Vec<(usize, f64)> = Vec::new();
    let mut zeroed = vec![false; n];
    let potential = |i: usize, chosen: &[(usize, f64)]| -> f64 {
        let mut v = base[i];
        for &(c, pc) in chosen {
            v -= pc * (-beta * sq_dist(&data[i], &data[c])).exp();
        }
        v
    };
    let first = (0..n).max_by(|&a, &b| base[a].total_cmp(&base[b]).then(b.cmp(&a))).unwrap();
    let p1 = base[first];
    chosen.push((first, p1));
    loop {
        let pot: Vec<f64> = (0..n).map(|i| if zeroed[i] { 0.0 } else { potential(i, &chosen) }).collect();
        let c = (0..n).max_by(|&a, &b| pot[a].total_cmp(&pot[b]).then(b.cmp(&a))).unwrap();
        let pc = pot[c];
        let accept = if pc > p.accept_ratio * p1 {
            true
        } else if pc < p.reject_ratio * p1 {
            break;
        } else {
            let d = chosen.iter().map(|&(j, _)| sq_dist(&data[c], &data[j]).sqrt()).fold(f64::INFINITY, f64::min);
            d / p.radius + pc / p1 >= 1.0
        };
        if accept {
            chosen.push((c, pc));
            zeroed.iter_mut().for_each(|z| *z = false);
        } else {
            zeroed[c] = true;
        }
    }
    chosen.into_iter().map(|(i, _)| data[i].clone()).collect()
}

#[test]
fn subtractive_clustering_matches_reference() {
    for seed in 0..6 {
        let data = blobs(seed);
        for radius in [0.5, 1.0, 1.5] {
            let p = SubtractiveParams::with_radius(radius);
            let got = subtractive_clustering(&data, &p).unwrap();
            let want = reference_subtractive(&data, &p);
            assert_eq!(got.len(), want.len(), "seed {seed} radius {radius}");
            for (g, w) in got.iter().zip(&want) {
                assert!(sq_dist(g, w) < 1e-24, "seed {seed} radius {radius}: {g:?} vs {w:?}");
            }
        }
    }
}

#[test]
fn wrls_without_forgetting_equals_batch_least_squares() {
    let rel = common::wrls_ols_gap();
    assert!(rel < 1e-8, "relative difference {rel:.2e}");
}

#[test]
fn forgetting_tracks_a_parameter_change() {
    let before = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, -1.0]);
    let after = DMatrix::from_row_slice(1, 3, &[-0.5, 0.5, 1.0]);
    let run = |sigma: f64| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rule = FuzzyRule::new(vec![0.0], vec![1.0], 2, 1, 1e6);
        for i in 0..400 {
            let x = augment(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let truth = if i < 200 { &before } else { &after };
            wrls_update(&mut rule, &x, &(truth * &x), sigma).unwrap();
        }
        (&rule.consequent - &after).norm()
    };
    let (forgetting, plain) = (run(0.95), run(1.0));
    assert!(forgetting < 1e-3, "sigma 0.95 error {forgetting:.2e}");
    assert!(plain > 100.0 * forgetting, "sigma 1 error {plain:.2e}");
}

fn spring_samples(seed: u64) -> Vec<ForceSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let materials = [(1000.0, 5.0, 0.0), (500.0, 3.0, 0.04), (200.0, 2.0, 0.08)];
    let mut out = Vec::new();
    for (label, &(k, c, surface)) in materials.iter().enumerate() {
        for _ in 0..150 {
            let z = surface + rng.random_range(-0.01..0.005);
            let v = rng.random_range(-0.05..0.05);
            let f = if z < surface { -(k * (z - surface) + c * v) } else { 0.0 };
            let state = CartesianState::new(Vec3::new(0.0, 0.0, z), Vec3::new(0.0, 0.0, v), Vec3::zeros());
            out.push(ForceSample { state, force: Vec3::new(0.0, 0.0, f), label });
        }
    }
    out
}

#[test]
fn type_one_pipeline_matches_reference_inference() {
    let config =
        FuzzyConfig { fou_delta: 0.0, m: 1.5, cluster: SubtractiveParams::with_radius(0.5), ..Default::default() };
    let (model, _) = FuzzyModel::train(&spring_samples(1), &config).unwrap();
    assert!(model.rules.len() > 1);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let inputs: Vec<Vec<f64>> =
        (0..500).map(|_| vec![rng.random_range(-0.02..0.1), rng.random_range(-0.1..0.1)]).collect();
    let gap = common::type1_gap(&model, &inputs);
    assert!(gap <= 1e-12, "largest relative gap {gap:.2e}");
}
