//! Trained agents and force models on disk.

use std::path::Path;

use super::config::{ScenarioConfig, ARBITRATE_DIMS, RESTORE_DIMS};
use super::pipeline::Agents;
use super::HarnessError;
use crate::checkpoint::{Checkpoint, Section};
use crate::ddpg::DdpgAgent;
use crate::fuzzyforce::FuzzyModel;

pub const AGENTS_FILE: &str = "agents.ckpt";
pub const FORCE_FILE: &str = "force.ckpt";
pub const CURVE_FILE: &str = "training_curve.csv";

pub fn agents_checkpoint(cfg: &ScenarioConfig, agents: &Agents) -> Checkpoint {
    let mut doc = Checkpoint::new();
    let mut meta = Section::new("agents.meta");
    meta.push_str("scenario", cfg.kind.name());
    meta.push_str("config_hash", &cfg.hash);
    meta.push_usizes("present", &[agents.restore.is_some() as usize, agents.arbitrate.is_some() as usize]);
    doc.push(meta);
    if let Some(a) = &agents.restore {
        a.write_sections("restore", &mut doc);
    }
    if let Some(a) = &agents.arbitrate {
        a.write_sections("arbitrate", &mut doc);
    }
    doc
}

fn check_agent(name: &str, agent: &DdpgAgent, dims: (usize, usize), bounds: (f64, f64)) -> Result<(), HarnessError> {
    let c = agent.config();
    if (c.state_dim, c.action_dim) != dims {
        return Err(HarnessError::Mismatch(format!(
            "{name} agent maps {} -> {}, expected {} -> {}",
            c.state_dim, c.action_dim, dims.0, dims.1
        )));
    }
    if (c.action_lo, c.action_hi) != bounds {
        return Err(HarnessError::Mismatch(format!(
            "{name} agent acts in [{}, {}], expected [{}, {}]",
            c.action_lo, c.action_hi, bounds.0, bounds.1
        )));
    }
    Ok(())
}

/// Loads the agents the scenario needs and checks their shapes and action
/// bounds against it.
pub fn agents_from_checkpoint(cfg: &ScenarioConfig, doc: &Checkpoint) -> Result<Agents, HarnessError> {
    let meta = doc.section("agents.meta")?;
    let trained_for = meta.str("scenario")?;
    if trained_for != cfg.kind.name() {
        return Err(HarnessError::Mismatch(format!("agents were trained for {trained_for}, not {}", cfg.kind.name())));
    }
    let present = meta.usizes("present")?;
    let has = |i: usize| present.get(i).copied().unwrap_or(0) != 0;
    let restore = if cfg.restoration {
        if !has(0) {
            return Err(HarnessError::Mismatch(
                "scenario restores delayed commands but the checkpoint has no restoration agent".into(),
            ));
        }
        let a = DdpgAgent::read_sections("restore", doc)?;
        check_agent("restoration", &a, RESTORE_DIMS, (-1.0, 1.0))?;
        Some(a)
    } else {
        None
    };
    if !has(1) {
        return Err(HarnessError::Mismatch("checkpoint has no arbitration agent".into()));
    }
    let arbitrate = DdpgAgent::read_sections("arbitrate", doc)?;
    check_agent("arbitration", &arbitrate, ARBITRATE_DIMS, cfg.weight_bounds)?;
    Ok(Agents { restore, arbitrate: Some(arbitrate) })
}

pub fn force_checkpoint(model: &FuzzyModel) -> Checkpoint {
    let mut doc = Checkpoint::new();
    model.write_sections(&mut doc);
    doc
}

pub fn force_from_checkpoint(cfg: &ScenarioConfig, doc: &Checkpoint) -> Result<FuzzyModel, HarnessError> {
    let model = FuzzyModel::read_sections(doc)?;
    if model.config.features != cfg.force.model.features {
        return Err(HarnessError::Mismatch(format!(
            "force model uses features {:?}, scenario expects {:?}",
            model.config.features, cfg.force.model.features
        )));
    }
    Ok(model)
}

pub fn write_checkpoint(path: &Path, doc: &Checkpoint) -> Result<(), HarnessError> {
    std::fs::write(path, doc.to_text()).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(Checkpoint::parse(&text)?)
}
