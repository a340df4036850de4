//! Independent runs over many seeds, optionally in parallel. Results come back
//! in seed order regardless of scheduling, and each run depends only on its
//! own seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::run::{run_drift, run_training, DriftResult, RunMetrics};

fn pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs `config` once per seed on `parallelism` threads.
pub fn run_sweep(config: &RunConfig, seeds: &[u64], parallelism: usize) -> Result<Vec<RunMetrics>> {
    config.validate()?;
    if parallelism <= 1 {
        return seeds.iter().map(|&s| run_training(&config.with_seed(s))).collect();
    }
    pool(parallelism)?.install(|| seeds.par_iter().map(|&s| run_training(&config.with_seed(s))).collect())
}

pub fn run_drift_sweep(config: &RunConfig, seeds: &[u64], parallelism: usize) -> Result<Vec<DriftResult>> {
    config.validate()?;
    if parallelism <= 1 {
        return seeds.iter().map(|&s| run_drift(&config.with_seed(s))).collect();
    }
    pool(parallelism)?.install(|| seeds.par_iter().map(|&s| run_drift(&config.with_seed(s))).collect())
}

/// Fraction of runs that have succeeded by each check step.
pub fn success_curve(runs: &[RunMetrics], interval: u64, total_steps: u64) -> Vec<(u64, f64)> {
    let n = runs.len().max(1) as f64;
    (1..=total_steps / interval)
        .map(|k| {
            let step = k * interval;
            let done = runs.iter().filter(|m| m.success_step.is_some_and(|s| s <= step)).count();
            (step, done as f64 / n)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub runs: usize,
    pub successes: usize,
    pub failures: usize,
    pub divergences: usize,
    pub success_rate: f64,
    pub failure_rate: f64,
}

impl SweepSummary {
    pub fn from_runs(runs: &[RunMetrics]) -> Self {
        let n = runs.len();
        let successes = runs.iter().filter(|m| m.success).count();
        let divergences = runs.iter().filter(|m| m.diverged).count();
        let failures = n - successes - divergences;
        let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        Self {
            runs: n,
            successes,
            failures,
            divergences,
            success_rate: rate(successes),
            failure_rate: rate(failures),
        }
    }
}
