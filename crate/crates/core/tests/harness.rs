use deadlock_lab::agents::Agent;
use deadlock_lab::env::EnvKind;
use deadlock_lab::harness::analysis::count_rewarded_in_minibatches;
use deadlock_lab::harness::io::{read_sweep_csv, write_sweep_csv, SweepRow};
use deadlock_lab::harness::{
    export_critic_snapshot, run_drift, run_sweep, run_training, run_training_with_agent, success_curve, AgentKind,
    NoiseKind, ProbeGrid, RunConfig,
};
use deadlock_lab::net::{SeedStreams, Stream};

fn small(steps: u64) -> RunConfig {
    RunConfig {
        hidden_sizes: vec![8, 8],
        total_steps: steps,
        ..RunConfig::default()
    }
}

#[test]
fn reruns_are_bitwise_identical() {
    for agent in [AgentKind::Ddpg, AgentKind::DdpgArgmax, AgentKind::Regression] {
        let cfg = RunConfig {
            agent,
            argmax_candidates: 10,
            trace_interval: 500,
            ..small(2500)
        }
        .with_seed(17);
        let a = run_training(&cfg).unwrap();
        let b = run_training(&cfg).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_sweep_csv(&mut buf_a, &[a]).unwrap();
        write_sweep_csv(&mut buf_b, &[b]).unwrap();
        assert_eq!(buf_a, buf_b);
    }
}

#[test]
fn sweep_rows_do_not_depend_on_parallelism() {
    let cfg = small(2000);
    let seeds: Vec<u64> = (0..6).collect();
    let serial = run_sweep(&cfg, &seeds, 1).unwrap();
    let parallel = run_sweep(&cfg, &seeds, 4).unwrap();
    assert_eq!(serial, parallel);
    let reversed: Vec<u64> = seeds.iter().rev().copied().collect();
    let mut backwards = run_sweep(&cfg, &reversed, 2).unwrap();
    backwards.reverse();
    assert_eq!(serial, backwards);
}

#[test]
fn bookkeeping_and_success_invariants() {
    let cfg = small(5000);
    for seed in 0..4 {
        let m = run_training(&cfg.with_seed(seed)).unwrap();
        let per_phase: u64 = count_rewarded_in_minibatches(&m).iter().sum();
        assert_eq!(per_phase, m.rewarded_samples_drawn);
        if m.success {
            assert!(m.success_step.unwrap() <= cfg.total_steps);
        }
        if let (Some(first), Some(done)) = (m.first_reward_step, m.success_step) {
            assert!(first <= done);
        }
        let iterations: u64 = m.rewarded_per_training_phase.iter().map(|p| p.iterations as u64).sum();
        assert!(iterations <= m.steps_run);
    }
}

#[test]
fn success_curve_is_monotone() {
    let runs = run_sweep(&small(3000), &[0, 1, 2, 3, 4], 1).unwrap();
    let curve = success_curve(&runs, 1000, 3000);
    assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
}

#[test]
fn update_ratio_knob_freezes_networks() {
    let init = |cfg: &RunConfig| Agent::new(cfg.agent_config(), &mut SeedStreams::new(cfg.seed).stream(Stream::Init)).unwrap();
    let cfg = RunConfig {
        critic_updates_per_step: 0,
        actor_updates_per_step: 3,
        ..small(400)
    };
    let (_, trained) = run_training_with_agent(&cfg).unwrap();
    assert_eq!(trained.critic.values(), init(&cfg).critic.values());

    let cfg = RunConfig {
        critic_updates_per_step: 3,
        actor_updates_per_step: 0,
        ..small(400)
    };
    let (_, trained) = run_training_with_agent(&cfg).unwrap();
    assert_eq!(trained.actor.values(), init(&cfg).actor.values());
}

#[test]
fn optimal_behaviour_from_start_succeeds_within_two_checks() {
    let cfg = RunConfig {
        substitute_optimal_at: Some(0),
        noise: NoiseKind::None,
        ..small(20_000)
    };
    let m = run_training(&cfg).unwrap();
    assert!(m.success);
    assert!(m.success_step.unwrap() <= 2 * cfg.success_check_interval);
}

#[test]
fn fresh_critic_is_small_on_probe_grid() {
    let cfg = RunConfig::default();
    for seed in 0..5 {
        let agent = Agent::new(cfg.agent_config(), &mut SeedStreams::new(seed).stream(Stream::Init)).unwrap();
        let snap = export_critic_snapshot(&agent, &ProbeGrid::default(), 0).unwrap();
        assert_eq!(snap.q.len(), 101 * 41);
        assert!(snap.q.iter().all(|q| q.abs() < 1.0));
        assert!(snap.pi.iter().all(|a| a.abs() < 0.1));
    }
}

#[test]
fn stuck_actor_without_noise_stops_drawing_rewards() {
    // No exploration and a buffer that never sees a reward.
    let cfg = RunConfig {
        noise: NoiseKind::None,
        ..small(3000)
    };
    for seed in 0..10 {
        let m = run_training(&cfg.with_seed(seed)).unwrap();
        if m.first_reward_step.is_none() {
            assert!(count_rewarded_in_minibatches(&m).iter().all(|&c| c == 0));
            return;
        }
    }
    panic!("every seed found the reward without noise");
}

#[test]
fn drift_runs_are_reward_free_and_reproducible() {
    let cfg = RunConfig {
        env: EnvKind::Drift,
        ..small(300)
    };
    let a = run_drift(&cfg).unwrap();
    assert_eq!(a, run_drift(&cfg).unwrap());
    assert_eq!(a.trace.len(), 30);
}

#[test]
fn sweep_csv_round_trips_metrics() {
    let runs = run_sweep(&small(1500), &[3, 4], 1).unwrap();
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &runs).unwrap();
    let rows = read_sweep_csv(buf.as_slice()).unwrap();
    let expect: Vec<SweepRow> = runs.iter().map(SweepRow::from).collect();
    assert_eq!(rows, expect);
}
