//! Result files. Column names and order are part of the public interface.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{RunConfig, ASSUMED_DEFAULT_KEYS, LOSS_REDUCTION};
use crate::harness::run::{CriticSnapshot, DriftResult, RunMetrics};

pub const SCHEMA_VERSION: u32 = 1;

pub const SWEEP_COLUMNS: [&str; 6] = [
    "seed",
    "success",
    "success_step",
    "first_reward_step",
    "final_policy_mean_action",
    "diverged",
];
pub const DRIFT_COLUMNS: [&str; 4] = ["step", "max_abs_q", "max_abs_pi", "seed"];
pub const SNAPSHOT_COLUMNS: [&str; 5] = ["step", "s", "a", "q", "pi_of_s"];
pub const PHASE_COLUMNS: [&str; 5] = ["seed", "episode", "end_step", "iterations", "rewarded"];

/// One sweep CSV row. Missing steps are empty fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub success: u8,
    pub success_step: Option<u64>,
    pub first_reward_step: Option<u64>,
    pub final_policy_mean_action: f64,
    pub diverged: u8,
}

impl From<&RunMetrics> for SweepRow {
    fn from(m: &RunMetrics) -> Self {
        Self {
            seed: m.seed,
            success: m.success as u8,
            success_step: m.success_step,
            first_reward_step: m.first_reward_step,
            final_policy_mean_action: m.final_policy_mean_action,
            diverged: m.diverged as u8,
        }
    }
}

pub fn write_sweep_csv<W: Write>(out: W, runs: &[RunMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for m in runs {
        w.serialize(SweepRow::from(m))?;
    }
    if runs.is_empty() {
        w.write_record(SWEEP_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sweep CSV, rejecting files without the documented columns.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if let Some(missing) = SWEEP_COLUMNS.iter().find(|c| !headers.iter().any(|h| h == **c)) {
        return Err(Error::Config(format!("sweep CSV is missing column `{missing}`")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_drift_csv<W: Write>(out: W, runs: &[DriftResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DRIFT_COLUMNS)?;
    for run in runs {
        for p in &run.trace {
            w.write_record([
                p.step.to_string(),
                p.max_abs_q.to_string(),
                p.max_abs_pi.to_string(),
                run.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshot_csv<W: Write>(out: W, snapshots: &[CriticSnapshot]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SNAPSHOT_COLUMNS)?;
    for snap in snapshots {
        for (i, s) in snap.states.iter().enumerate() {
            for (j, a) in snap.actions.iter().enumerate() {
                w.write_record([
                    snap.step.to_string(),
                    s.to_string(),
                    a.to_string(),
                    snap.q_at(i, j).to_string(),
                    snap.pi[i].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-phase rewarded-sample counts of the given runs.
pub fn write_phase_csv<W: Write>(out: W, runs: &[&RunMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PHASE_COLUMNS)?;
    for m in runs {
        for p in &m.rewarded_per_training_phase {
            w.write_record([
                m.seed.to_string(),
                p.episode.to_string(),
                p.end_step.to_string(),
                p.iterations.to_string(),
                p.rewarded.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Run JSON: configuration echo plus metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub config: RunConfig,
    pub assumed_defaults: Vec<String>,
    pub loss_reduction: String,
    pub metrics: RunMetrics,
}

impl RunRecord {
    pub fn new(config: &RunConfig, metrics: RunMetrics) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            assumed_defaults: ASSUMED_DEFAULT_KEYS.iter().map(|s| s.to_string()).collect(),
            loss_reduction: LOSS_REDUCTION.to_string(),
            metrics,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_run_json(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn create_file(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::{analytic_snapshot, run_training, ProbeGrid, TracePoint};

    fn quick() -> RunMetrics {
        let cfg = RunConfig {
            hidden_sizes: vec![4],
            total_steps: 120,
            ..RunConfig::default()
        };
        run_training(&cfg).unwrap()
    }

    #[test]
    fn sweep_csv_header_and_empty_fields() {
        let mut m = quick();
        m.success = false;
        m.success_step = None;
        m.first_reward_step = Some(12);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[m.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_COLUMNS.join(","));
        assert!(lines.next().unwrap().starts_with("0,0,,12,"));
        let rows = read_sweep_csv(buf.as_slice()).unwrap();
        assert_eq!(rows, vec![SweepRow::from(&m)]);
    }

    #[test]
    fn missing_column_is_named() {
        let err = read_sweep_csv("seed,success\n0,1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("success_step"), "{err}");
    }

    #[test]
    fn empty_sweep_still_has_header() {
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), SWEEP_COLUMNS.join(","));
    }

    #[test]
    fn drift_and_snapshot_layouts() {
        let drift = DriftResult {
            seed: 4,
            trace: vec![TracePoint { step: 10, max_abs_q: 0.5, max_abs_pi: 0.25 }],
            final_policy_mean_action: 0.0,
            diverged: false,
        };
        let mut buf = Vec::new();
        write_drift_csv(&mut buf, &[drift]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,max_abs_q,max_abs_pi,seed\n10,0.5,0.25,4\n");

        let grid = ProbeGrid::new(2, 2);
        let snap = analytic_snapshot(&grid, 7, |s, a| s + a, |_| 0.1);
        let mut buf = Vec::new();
        write_snapshot_csv(&mut buf, &[snap]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "step,s,a,q,pi_of_s");
        assert_eq!(text.lines().nth(1).unwrap(), "7,0,-0.1,-0.1,0.1");
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn run_record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let record = RunRecord::new(&RunConfig::default(), quick());
        write_json(&path, &record).unwrap();
        let back = read_run_json(&path).unwrap();
        assert_eq!(back.schema_version, SCHEMA_VERSION);
        assert_eq!(back.config, record.config);
        assert_eq!(back.metrics.seed, record.metrics.seed);
        assert_eq!(back.loss_reduction, "mean");
    }
}
