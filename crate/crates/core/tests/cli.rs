use std::fs;
use std::path::Path;

use deadlock_lab::cli::main_with_args;
use deadlock_lab::harness::io::{read_run_json, read_sweep_csv};
use deadlock_lab::harness::RunConfig;

fn run(out: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["deadlock-lab".to_string(), "--out".into(), out.display().to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    main_with_args(full)
}

const SMALL: [&str; 4] = ["--set", "hidden_sizes=[8,8]", "--set", "total_steps=1500"];

#[test]
fn train_writes_run_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--seed", "5", "--gamma", "0.95", "--noise", "ou"];
    args.extend(SMALL);
    assert_eq!(run(dir.path(), &args), 0);
    let cfg: RunConfig = RunConfig::from_json(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!((cfg.seed, cfg.gamma, cfg.total_steps), (5, 0.95, 1500));
    let record = read_run_json(&dir.path().join("run.json")).unwrap();
    assert_eq!(record.schema_version, 1);
    assert_eq!(record.config, cfg);
    assert_eq!(record.metrics.seed, 5);
}

#[test]
fn config_file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("in.json");
    fs::write(&path, r#"{"hidden_sizes": [4], "total_steps": 700, "seed": 2}"#).unwrap();
    let out = dir.path().join("out");
    let code = run(&out, &["train", "--config", path.to_str().unwrap(), "--set", "seed=9"]);
    assert_eq!(code, 0);
    let cfg = RunConfig::from_json(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!((cfg.seed, cfg.total_steps, cfg.hidden_sizes.clone()), (9, 700, vec![4]));
}

#[test]
fn sweep_writes_one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--seeds", "0..4", "--jobs", "2"];
    args.extend(SMALL);
    assert_eq!(run(dir.path(), &args), 0);
    let rows = read_sweep_csv(fs::File::open(dir.path().join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"]["runs"], 5);
    assert!(dir.path().join("phase_counts.csv").exists());
}

#[test]
fn drift_writes_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["drift", "--seeds", "0..1", "--steps", "50", "--set", "hidden_sizes=[4]"]), 0);
    let text = fs::read_to_string(dir.path().join("drift.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "step,max_abs_q,max_abs_pi,seed");
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn oracle_passes_and_emits_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["oracle"]), 0);
    let table = fs::read_to_string(dir.path().join("qtable_left.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "s,a,q,n_steps");
    assert_eq!(table.lines().count(), 1 + 101 * 41);
    assert!(dir.path().join("oracle.json").exists());
}

#[test]
fn analytic_snapshot_has_two_levels() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["snapshot", "--analytic"]), 0);
    let mut reader = csv::Reader::from_path(dir.path().join("snapshot.csv")).unwrap();
    let mut levels: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[3].parse::<f64>().unwrap())
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    assert_eq!(levels, vec![0.0, 1.0]);
}

#[test]
fn trained_snapshot_includes_requested_steps() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["snapshot", "--at", "500,1000"];
    args.extend(SMALL);
    assert_eq!(run(dir.path(), &args), 0);
    let mut reader = csv::Reader::from_path(dir.path().join("snapshot.csv")).unwrap();
    let mut steps: Vec<u64> = reader.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    steps.dedup();
    assert!(steps.starts_with(&[500, 1000]), "{steps:?}");
}

#[test]
fn grad_check_command() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["grad-check", "--nets", "10"]), 0);
    assert_eq!(run(dir.path(), &["grad-check", "--nets", "10", "--tolerance", "0"]), 1);
}

#[test]
fn bad_inputs_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["train", "--set", "nonsense=1"]), 2);
    assert_eq!(run(dir.path(), &["train", "--set", "gamma"]), 2);
    assert_eq!(run(dir.path(), &["sweep", "--seeds", "9..1"]), 2);
    assert_eq!(run(dir.path(), &["train", "--config", "/nonexistent/cfg.json"]), 2);
    assert_eq!(run(dir.path(), &["train", "--agent", "td3"]), 2);
}

#[test]
fn resolved_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let mut args = vec!["train", "--seed", "11", "--agent", "regression"];
    args.extend(SMALL);
    assert_eq!(run(&first, &args), 0);
    let second = dir.path().join("second");
    let cfg = first.join("config.json");
    assert_eq!(run(&second, &["train", "--config", cfg.to_str().unwrap()]), 0);
    assert_eq!(
        fs::read_to_string(first.join("run.json")).unwrap(),
        fs::read_to_string(second.join("run.json")).unwrap()
    );
}
