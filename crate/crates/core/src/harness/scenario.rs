//! Evaluation runs and their reports.

use std::collections::BTreeMap;

use serde::Serialize;

use super::config::{ScenarioConfig, ScenarioKind};
use super::metrics::{rmse3, Rmse3};
use super::pipeline::{Agents, Pipeline, TickRecord};
use super::training::EpisodeStats;
use super::HarnessError;
use crate::fuzzyforce::FuzzyModel;
use crate::Vec3;

/// Runs the configured scenario greedily for `cfg.steps` ticks.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    agents: &mut Agents,
    force: Option<&FuzzyModel>,
) -> Result<Vec<TickRecord>, HarnessError> {
    let mut pipeline = Pipeline::new(cfg)?;
    (0..cfg.steps).map(|_| Ok(pipeline.tick(agents, false, force)?.record)).collect()
}

/// `left < right`, or `left ≤ right` when `strict` is false.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub left: f64,
    pub right: f64,
    pub strict: bool,
    pub pass: bool,
}

impl Gate {
    fn less(name: &str, left: f64, right: f64) -> Self {
        Self { name: name.into(), left, right, strict: true, pass: left < right }
    }

    fn at_most(name: &str, left: f64, right: f64) -> Self {
        Self { name: name.into(), left, right, strict: false, pass: left <= right }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub ticks: usize,
    /// Ticks after the first master command reached the slave; every RMSE
    /// is taken over these.
    pub link_ticks: usize,
    pub rmse: BTreeMap<String, Rmse3>,
    pub max_weight: f64,
    pub weight_bound: f64,
    pub wall_clock_s: Option<f64>,
    pub episodes: Vec<EpisodeStats>,
    pub gates: Vec<Gate>,
}

impl RunReport {
    /// Everything except wall clock and the training curve comes from the
    /// logged ticks.
    pub fn from_records(cfg: &ScenarioConfig, records: &[TickRecord]) -> Result<Self, HarnessError> {
        let linked: Vec<&TickRecord> = records.iter().filter(|r| r.link).collect();
        if linked.is_empty() {
            return Err(HarnessError::Length { left: 0, right: records.len() });
        }
        let col = |f: fn(&TickRecord) -> Vec3| linked.iter().map(|r| f(r)).collect::<Vec<_>>();
        let mut rmse = BTreeMap::new();
        let mut put =
            |name: &str, a: fn(&TickRecord) -> Vec3, b: fn(&TickRecord) -> Vec3| -> Result<(), HarnessError> {
                rmse.insert(name.to_string(), rmse3(&col(a), &col(b))?);
                Ok(())
            };
        put("sc_ref", |r| r.x_sc, |r| r.reference)?;
        put("mc_ref", |r| r.x_mc, |r| r.reference)?;
        put("m1_ref", |r| r.masters[0], |r| r.reference)?;
        if linked.iter().all(|r| r.masters[1].iter().all(|v| v.is_finite())) {
            put("m2_ref", |r| r.masters[1], |r| r.reference)?;
        }
        put("cp_ref", |r| r.copilot, |r| r.reference)?;
        put("cpf_ref", |r| r.x_cpf, |r| r.reference)?;
        put("mf_ref", |r| r.x_mf, |r| r.reference)?;
        put("s_ref", |r| r.x_s, |r| r.reference)?;
        put("d_mc", |r| r.x_d, |r| r.x_mc)?;
        put("mf_mc", |r| r.x_mf, |r| r.x_mc)?;

        let forces: Vec<&&TickRecord> = linked.iter().filter(|r| r.f_hat.iter().all(|v| v.is_finite())).collect();
        if !forces.is_empty() {
            let est: Vec<Vec3> = forces.iter().map(|r| r.f_hat).collect();
            let meas: Vec<Vec3> = forces.iter().map(|r| r.f_se).collect();
            rmse.insert("fhat_fse".to_string(), rmse3(&est, &meas)?);
        }

        let max_weight = records.iter().flat_map(|r| r.w.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
        let weight_bound = cfg.weight_bounds.1;
        let n = |k: &str| rmse[k].norm;
        let mut gates = vec![Gate::at_most("weights_within_bound", max_weight, weight_bound)];
        match cfg.kind {
            ScenarioKind::DualPilot => {
                let best = rmse
                    .iter()
                    .filter(|(k, _)| ["m1_ref", "m2_ref", "cp_ref"].contains(&k.as_str()))
                    .map(|(_, v)| v.norm);
                gates.push(Gate::less("shared_beats_every_operator", n("sc_ref"), best.fold(f64::INFINITY, f64::min)));
            }
            ScenarioKind::TriplePilotDelay => {
                gates.push(Gate::less("shared_beats_fused_masters", n("sc_ref"), n("mc_ref")));
            }
        }
        // Operator error steps cannot be predicted across the delay, so the
        // restoration gate only applies to error-free runs.
        let clean = cfg.masters.iter().chain(std::iter::once(&cfg.copilot)).all(|o| o.windows.is_empty());
        if cfg.restoration && cfg.channel.base_delay > 0.0 && clean {
            gates.push(Gate::less("restoration_halves_delay_error", n("mf_mc"), 0.5 * n("d_mc")));
        }

        Ok(Self {
            scenario: cfg.kind.name().to_string(),
            config_hash: cfg.hash.clone(),
            seed: cfg.seed,
            ticks: records.len(),
            link_ticks: linked.len(),
            rmse,
            max_weight,
            weight_bound,
            wall_clock_s: None,
            episodes: Vec::new(),
            gates,
        })
    }

    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable RMSE table and gate lines.
    pub fn summary(&self) -> String {
        let mut s =
            format!("{} seed {} ({} ticks, {} linked)\n", self.scenario, self.seed, self.ticks, self.link_ticks);
        s.push_str("signal        x          y          z          norm\n");
        for (k, v) in &self.rmse {
            s.push_str(&format!("{k:<10} {:.6e} {:.6e} {:.6e} {:.6e}\n", v.x, v.y, v.z, v.norm));
        }
        for g in &self.gates {
            let op = if g.strict { "<" } else { "<=" };
            let verdict = if g.pass { "PASS" } else { "FAIL" };
            s.push_str(&format!("{verdict} {}: {:.6e} {op} {:.6e}\n", g.name, g.left, g.right));
        }
        s
    }
}
