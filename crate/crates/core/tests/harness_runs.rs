use mpteleop_core::harness::{
    agents_checkpoint, agents_from_checkpoint, read_checkpoint, rmse, rmse3, run_scenario, ticks_to_string,
    train_agents, write_checkpoint, KeyValues, RunReport, ScenarioConfig,
};
use mpteleop_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DUAL: &str = include_str!("../../../configs/dual_pilot.conf");
const TRIPLE: &str = include_str!("../../../configs/triple_pilot.conf");

fn config(text: &str, overrides: &[(&str, &str)]) -> ScenarioConfig {
    let mut kv = KeyValues::parse(text).unwrap();
    for (k, v) in overrides {
        kv.set(k, v);
    }
    ScenarioConfig::from_kv(&kv).unwrap()
}

#[test]
fn rmse_matches_the_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a: Vec<f64> = (0..777).map(|_| rng.random_range(-3.0..3.0)).collect();
    let b: Vec<f64> = (0..777).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut sum = 0.0;
    for i in 0..a.len() {
        sum += (a[i] - b[i]) * (a[i] - b[i]);
    }
    let want = (sum / a.len() as f64).sqrt();
    assert!((rmse(&a, &b).unwrap() - want).abs() <= 1e-12 * want);

    let va: Vec<Vec3> = a.chunks(3).take(259).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    let vb: Vec<Vec3> = b.chunks(3).take(259).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    let norm = (va.iter().zip(&vb).map(|(x, y)| (x - y).norm_squared()).sum::<f64>() / va.len() as f64).sqrt();
    assert!((rmse3(&va, &vb).unwrap().norm - norm).abs() <= 1e-12 * norm);
    assert!(rmse(&a, &b[..10]).is_err());
}

#[test]
fn short_runs_are_byte_identical() {
    let cfg =
        config(TRIPLE, &[("training.episodes", "2"), ("training.steps", "300"), ("steps", "400"), ("duration", "4")]);
    let once = || {
        let (mut agents, curve) = train_agents(&cfg, |_| {}).unwrap();
        (ticks_to_string(&run_scenario(&cfg, &mut agents, None).unwrap()), curve)
    };
    let (a, ca) = once();
    let (b, cb) = once();
    assert_eq!(a, b);
    assert_eq!(ca, cb);

    let other = config(
        TRIPLE,
        &[("training.episodes", "2"), ("training.steps", "300"), ("steps", "400"), ("duration", "4"), ("seed", "2")],
    );
    let (mut agents, _) = train_agents(&other, |_| {}).unwrap();
    assert_ne!(a, ticks_to_string(&run_scenario(&other, &mut agents, None).unwrap()));
}

#[test]
fn checkpointed_agents_replay_the_same_run() {
    let cfg =
        config(DUAL, &[("training.episodes", "2"), ("training.steps", "300"), ("steps", "500"), ("duration", "5")]);
    let (mut agents, _) = train_agents(&cfg, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agents.json");
    write_checkpoint(&path, &agents_checkpoint(&cfg, &agents)).unwrap();
    let mut loaded = agents_from_checkpoint(&cfg, &read_checkpoint(&path).unwrap()).unwrap();
    let a = ticks_to_string(&run_scenario(&cfg, &mut agents, None).unwrap());
    let b = ticks_to_string(&run_scenario(&cfg, &mut loaded, None).unwrap());
    assert_eq!(a, b);
}

#[test]
fn arbitration_return_improves_with_training() {
    let mut early = 0.0;
    let mut late = 0.0;
    for seed in 1..=5 {
        let s = seed.to_string();
        let cfg = config(
            DUAL,
            &[("training.episodes", "12"), ("training.steps", "1000"), ("training.keep_best", "false"), ("seed", &s)],
        );
        let (_, curve) = train_agents(&cfg, |_| {}).unwrap();
        let ret: Vec<f64> = curve.iter().map(|e| e.arbitrate_return.unwrap()).collect();
        early += ret[..4].iter().sum::<f64>();
        late += ret[ret.len() - 4..].iter().sum::<f64>();
    }
    assert!(late > early, "late {late:.1} vs early {early:.1}");
}

#[test]
fn master_oriented_weights_stay_at_or_below_half() {
    let cfg =
        config(DUAL, &[("arbitration.mode", "master-oriented"), ("training.episodes", "2"), ("training.steps", "500")]);
    let (mut agents, _) = train_agents(&cfg, |_| {}).unwrap();
    let records = run_scenario(&cfg, &mut agents, None).unwrap();
    let report = RunReport::from_records(&cfg, &records).unwrap();
    assert!(report.max_weight <= 0.5);
    assert!(records.iter().all(|r| r.w.iter().all(|w| (0.0..=0.5).contains(w))));
}
