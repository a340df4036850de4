//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 when a check fails, 2 on usage, configuration
//! or I/O errors. Every command writes its resolved `config.json` into the
//! output directory.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::env::EnvKind;
use crate::error::Result;
use crate::harness::analysis::{self, DEFAULT_FIRST_REWARD_EDGES};
use crate::harness::io::{self, RunRecord};
use crate::harness::{
    analytic_snapshot, parse_override, run_drift_sweep, run_sweep, run_training, success_curve, AgentKind,
    NoiseKind, ProbeGrid, RunConfig, SweepSummary,
};
use crate::net::random_gradient_checks;
use crate::oracle::{self, compute_qpi, GridSpec};

#[derive(Debug, Parser)]
#[command(name = "deadlock-lab", version, about = "DDPG deadlock experiments on a 1D sparse-reward toy")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat JSON config file; unspecified keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "DEADLOCK_LAB_OUT", default_value = "out")]
    out: PathBuf,
    /// Config override, `key=value` (repeatable; value parsed as JSON when possible).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_noise)]
    noise: Option<NoiseKind>,
    #[arg(long, global = true, value_parser = parse_agent)]
    agent: Option<AgentKind>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one agent and write `run.json`.
    Train,
    /// Train one agent per seed and write `sweep.csv`, `summary.json` and `phase_counts.csv`.
    Sweep {
        /// Inclusive range `a..b`, `a..=b`, a comma list, or a single seed.
        #[arg(long, value_parser = parse_seeds)]
        seeds: SeedList,
    },
    /// Reward-free drift runs; writes `drift.csv`.
    Drift {
        #[arg(long, value_parser = parse_seeds, default_value = "0..19")]
        seeds: SeedList,
        #[arg(long, default_value_t = 5000)]
        steps: u64,
    },
    /// Exact value checks; writes `oracle.json` and Q-table CSVs.
    Oracle,
    /// Critic/actor snapshots over the probe grid; writes `snapshot.csv`.
    Snapshot {
        /// Training steps at which to snapshot (the final state is always included).
        #[arg(long, value_delimiter = ',')]
        at: Vec<u64>,
        /// Snapshot the analytic deadlock pair instead of training.
        #[arg(long)]
        analytic: bool,
    },
    /// Finite-difference check of backpropagation on random networks.
    GradCheck {
        #[arg(long, default_value_t = 100)]
        nets: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

/// Parses `a..b` (inclusive), `a..=b`, `a,b,c` or `a`.
pub fn parse_seeds(text: &str) -> std::result::Result<SeedList, String> {
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("bad seed `{s}`: {e}"));
    let seeds = if let Some((a, b)) = text.split_once("..") {
        let (lo, hi) = (num(a)?, num(b.trim_start_matches('='))?);
        if hi < lo {
            return Err(format!("empty seed range `{text}`"));
        }
        (lo..=hi).collect()
    } else {
        text.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?
    };
    Ok(SeedList(seeds))
}

fn parse_noise(text: &str) -> std::result::Result<NoiseKind, String> {
    serde_json::from_value(serde_json::Value::String(text.into())).map_err(|_| format!("unknown noise `{text}`"))
}

fn parse_agent(text: &str) -> std::result::Result<AgentKind, String> {
    serde_json::from_value(serde_json::Value::String(text.into())).map_err(|_| format!("unknown agent `{text}`"))
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        let pairs = self
            .overrides
            .iter()
            .map(|o| parse_override(o))
            .collect::<Result<Vec<_>>>()?;
        let mut cfg = base.with_overrides(pairs)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(noise) = self.noise {
            cfg.noise = noise;
        }
        if let Some(agent) = self.agent {
            cfg.agent = agent;
        }
        if let Some(gamma) = self.gamma {
            cfg.gamma = gamma;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Outcome {
    Ok,
    CheckFailed,
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::CheckFailed) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn write_config(out: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out)?;
    io::write_json(&out.join("config.json"), cfg)
}

fn execute(cli: Cli) -> Result<Outcome> {
    let out = cli.common.out.clone();
    let jobs = cli.common.jobs;
    match cli.command {
        Command::Train => {
            let cfg = cli.common.resolve()?;
            write_config(&out, &cfg)?;
            let metrics = run_training(&cfg)?;
            println!(
                "seed {}: success={} success_step={:?} first_reward_step={:?} mean_action={:.4}",
                metrics.seed,
                metrics.success,
                metrics.success_step,
                metrics.first_reward_step,
                metrics.final_policy_mean_action
            );
            io::write_json(&out.join("run.json"), &RunRecord::new(&cfg, metrics))?;
        }
        Command::Sweep { seeds } => {
            let cfg = cli.common.resolve()?;
            write_config(&out, &cfg)?;
            let runs = run_sweep(&cfg, &seeds.0, jobs)?;
            io::write_sweep_csv(io::create_file(&out.join("sweep.csv"))?, &runs)?;
            let failed: Vec<_> = runs.iter().filter(|m| m.failed()).collect();
            io::write_phase_csv(io::create_file(&out.join("phase_counts.csv"))?, &failed)?;
            let summary = SweepSummary::from_runs(&runs);
            println!(
                "{} runs: {} succeeded, {} failed, {} diverged",
                summary.runs, summary.successes, summary.failures, summary.divergences
            );
            io::write_json(
                &out.join("summary.json"),
                &serde_json::json!({
                    "schema_version": io::SCHEMA_VERSION,
                    "summary": summary,
                    "success_curve": success_curve(&runs, cfg.success_check_interval, cfg.total_steps),
                    "first_reward_histogram":
                        analysis::first_reward_failure_correlation(&runs, DEFAULT_FIRST_REWARD_EDGES),
                }),
            )?;
        }
        Command::Drift { seeds, steps } => {
            let mut cfg = cli.common.resolve()?;
            cfg.env = EnvKind::Drift;
            cfg.total_steps = steps;
            write_config(&out, &cfg)?;
            let runs = run_drift_sweep(&cfg, &seeds.0, jobs)?;
            io::write_drift_csv(io::create_file(&out.join("drift.csv"))?, &runs)?;
            let right = runs.iter().filter(|r| r.drifted_right()).count();
            println!("{} drift runs, {right} drifted right", runs.len());
        }
        Command::Oracle => {
            let cfg = cli.common.resolve()?;
            write_config(&out, &cfg)?;
            let report = oracle::run_all_checks(cfg.gamma)?;
            for c in &report.checks {
                let tag = match (c.passed, c.gating) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL",
                    (false, false) => "INFO",
                };
                println!("{tag} {}: {}", c.name, c.detail);
            }
            println!("elapsed {:.3}s", report.elapsed_seconds);
            io::write_json(&out.join("oracle.json"), &report)?;
            for (name, a) in [("right", 0.1), ("left", -0.1)] {
                let table = compute_qpi(&move |_| a, GridSpec::DEFAULT, cfg.gamma)?;
                table.write_csv(io::create_file(&out.join(format!("qtable_{name}.csv")))?)?;
            }
            if !report.passed() {
                return Ok(Outcome::CheckFailed);
            }
        }
        Command::Snapshot { at, analytic } => {
            let mut cfg = cli.common.resolve()?;
            let snapshots = if analytic {
                write_config(&out, &cfg)?;
                vec![analytic_snapshot(&ProbeGrid::default(), 0, oracle::indicator_critic, |_| 0.1)]
            } else {
                cfg.snapshot_steps = at;
                write_config(&out, &cfg)?;
                let (mut metrics, agent) = crate::harness::run_training_with_agent(&cfg)?;
                let last = metrics.steps_run;
                if !metrics.critic_snapshots.iter().any(|s| s.step == last) {
                    metrics
                        .critic_snapshots
                        .push(crate::harness::export_critic_snapshot(&agent, &ProbeGrid::default(), last)?);
                }
                metrics.critic_snapshots
            };
            io::write_snapshot_csv(io::create_file(&out.join("snapshot.csv"))?, &snapshots)?;
            println!("{} snapshots written", snapshots.len());
        }
        Command::GradCheck { nets, tolerance } => {
            let cfg = cli.common.resolve()?;
            let report = random_gradient_checks(nets, cfg.seed)?;
            println!(
                "{nets} networks, {} partials, max relative error {:e}",
                report.checked, report.max_relative_error
            );
            if !(report.max_relative_error <= tolerance) {
                return Ok(Outcome::CheckFailed);
            }
        }
    }
    Ok(Outcome::Ok)
}
