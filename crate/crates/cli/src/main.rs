use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mpteleop_core::fuzzyforce::FuzzyModel;
use mpteleop_core::harness::{
    agents_checkpoint, agents_from_checkpoint, evaluate_force_model, force_checkpoint, force_from_checkpoint,
    generate_trials, read_checkpoint, read_curve, read_ticks, run_scenario, split_trials, train_agents,
    train_force_model, write_checkpoint, write_curve, write_ticks, Agents, EpisodeStats, RunReport, ScenarioConfig,
    ScenarioKind, AGENTS_FILE, CURVE_FILE, FORCE_FILE, FORCE_RATIO_GATE,
};

const TICKS_FILE: &str = "ticks.csv";
const REPORT_FILE: &str = "report.json";
const FORCE_EVAL_FILE: &str = "force_eval.json";

#[derive(Parser)]
#[command(name = "mpteleop", version, about = "Multi-pilot teleoperation scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the restoration and arbitration agents.
    Train(Opts),
    /// Run a scenario with trained agents, training first if none are saved.
    Run(Opts),
    /// Recompute the report from a logged run.
    Report(Opts),
    /// Fit the force estimator on synthetic pressing trials.
    ForceFit(Opts),
    /// Score a fitted force estimator on the held-out trials.
    ForceEval(Opts),
}

#[derive(Args)]
struct Opts {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Directory holding agent and force-model checkpoints.
    #[arg(long, default_value = "checkpoints")]
    checkpoint: PathBuf,
}

impl Opts {
    fn load(&self) -> Result<ScenarioConfig> {
        ScenarioConfig::load(&self.config, self.seed).with_context(|| format!("loading {}", self.config.display()))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn train(cfg: &ScenarioConfig, opts: &Opts) -> Result<(Agents, Vec<EpisodeStats>)> {
    ensure_dir(&opts.checkpoint)?;
    let (agents, curve) = train_agents(cfg, |s| {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.1}"));
        eprintln!(
            "episode {:>3}  restore {:>10}  arbitrate {:>10}",
            s.episode,
            fmt(s.restore_return),
            fmt(s.arbitrate_return)
        );
    })?;
    write_checkpoint(&opts.checkpoint.join(AGENTS_FILE), &agents_checkpoint(cfg, &agents))?;
    write_curve(&curve, fs::File::create(opts.checkpoint.join(CURVE_FILE))?)?;
    Ok((agents, curve))
}

fn load_curve(opts: &Opts) -> Result<Vec<EpisodeStats>> {
    let path = opts.checkpoint.join(CURVE_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(read_curve(fs::File::open(&path)?)?)
}

fn fit_force(cfg: &ScenarioConfig, opts: &Opts) -> Result<FuzzyModel> {
    ensure_dir(&opts.checkpoint)?;
    let (train, _) = split_trials(cfg, generate_trials(cfg)?);
    let (model, summary) = train_force_model(cfg, &train)?;
    eprintln!(
        "fitted {} rules in {} c-means iterations, training RMSE {:.4e} N",
        summary.rules, summary.fcm_iterations, summary.train_rmse
    );
    write_checkpoint(&opts.checkpoint.join(FORCE_FILE), &force_checkpoint(&model))?;
    Ok(model)
}

fn verdict(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(opts: &Opts) -> Result<ExitCode> {
    let cfg = opts.load()?;
    let started = Instant::now();
    let agents_path = opts.checkpoint.join(AGENTS_FILE);
    let (mut agents, curve) = if agents_path.exists() {
        (agents_from_checkpoint(&cfg, &read_checkpoint(&agents_path)?)?, load_curve(opts)?)
    } else {
        eprintln!("no {} in {}, training", AGENTS_FILE, opts.checkpoint.display());
        train(&cfg, opts)?
    };
    let force = match cfg.kind {
        ScenarioKind::DualPilot => None,
        ScenarioKind::TriplePilotDelay => {
            let path = opts.checkpoint.join(FORCE_FILE);
            Some(if path.exists() {
                force_from_checkpoint(&cfg, &read_checkpoint(&path)?)?
            } else {
                fit_force(&cfg, opts)?
            })
        }
    };

    let records = run_scenario(&cfg, &mut agents, force.as_ref())?;
    ensure_dir(&opts.out)?;
    write_ticks(&records, fs::File::create(opts.out.join(TICKS_FILE))?)?;
    let mut report = RunReport::from_records(&cfg, &records)?;
    report.wall_clock_s = Some(started.elapsed().as_secs_f64());
    report.episodes = curve;
    fs::write(opts.out.join(REPORT_FILE), report.to_json())?;
    print!("{}", report.summary());
    Ok(verdict(report.passed()))
}

fn report(opts: &Opts) -> Result<ExitCode> {
    let cfg = opts.load()?;
    let path = opts.out.join(TICKS_FILE);
    let records = read_ticks(fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?)?;
    let mut report = RunReport::from_records(&cfg, &records)?;
    report.episodes = load_curve(opts)?;
    print!("{}", report.summary());
    Ok(verdict(report.passed()))
}

fn force_eval(opts: &Opts) -> Result<ExitCode> {
    let cfg = opts.load()?;
    let model = force_from_checkpoint(&cfg, &read_checkpoint(&opts.checkpoint.join(FORCE_FILE))?)?;
    let (_, test) = split_trials(&cfg, generate_trials(&cfg)?);
    let eval = evaluate_force_model(&cfg, &model, &test)?;
    for s in &eval.scores {
        println!(
            "{:<8} {:>6} samples  RMSE {:.4e} N  range {:.4e} N  ratio {:.4}",
            s.material, s.samples, s.rmse, s.force_range, s.ratio
        );
    }
    let pass = eval.max_ratio < FORCE_RATIO_GATE;
    println!("{} worst ratio {:.4} < {FORCE_RATIO_GATE}", if pass { "PASS" } else { "FAIL" }, eval.max_ratio);
    ensure_dir(&opts.out)?;
    fs::write(opts.out.join(FORCE_EVAL_FILE), serde_json::to_string_pretty(&eval)?)?;
    Ok(verdict(pass))
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(opts) => {
            let cfg = opts.load()?;
            train(&cfg, &opts)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(opts) => run(&opts),
        Command::Report(opts) => report(&opts),
        Command::ForceFit(opts) => {
            let cfg = opts.load()?;
            fit_force(&cfg, &opts)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ForceEval(opts) => force_eval(&opts),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
