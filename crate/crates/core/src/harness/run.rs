//! The episodic training loop, the reward-free drift loop, and the metrics
//! they record.
//!
//! Training loop, per environment step `t = 1..=total_steps`:
//!
//! 1. act with the behaviour policy (actor + noise, or the optimal policy once
//!    substitution is active) and store the transition;
//! 2. when the episode ends (terminal transition or `max_episode_length`
//!    steps), run one training iteration per step of that episode, each on a
//!    fresh minibatch, then reset the environment and the noise;
//! 3. every `success_check_interval` steps, stop with success if the last
//!    `success_window` episodes were all rewarded.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, Batch};
use crate::env::{self, Episode, ACTION_LIMIT};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::net::{Rng, SeedStreams, Stream};

/// Fixed evaluation grid: 101 states on `[0, 1]`, 41 actions on `[-0.1, 0.1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
}

impl ProbeGrid {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        assert!(n_states >= 2 && n_actions >= 2, "probe grid needs at least 2 points per axis");
        Self {
            states: linspace(0.0, 1.0, n_states),
            actions: linspace(-ACTION_LIMIT, ACTION_LIMIT, n_actions),
        }
    }

    /// Row-major `(s, a)` inputs, states outer.
    pub fn state_actions(&self) -> Vec<f64> {
        let mut rows = Vec::with_capacity(self.states.len() * self.actions.len() * 2);
        for &s in &self.states {
            for &a in &self.actions {
                rows.push(s);
                rows.push(a);
            }
        }
        rows
    }
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self::new(101, 41)
    }
}

/// `n` evenly spaced points, computed as `lo + i * step` with exact endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Critic values and actor outputs over a probe grid at one training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticSnapshot {
    pub step: u64,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    /// `q[i * actions.len() + j] = Q(states[i], actions[j])`.
    pub q: Vec<f64>,
    pub pi: Vec<f64>,
}

impl CriticSnapshot {
    pub fn q_at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.actions.len() + j]
    }
}

pub fn export_critic_snapshot(agent: &Agent, grid: &ProbeGrid, step: u64) -> Result<CriticSnapshot> {
    let n = grid.states.len() * grid.actions.len();
    Ok(CriticSnapshot {
        step,
        states: grid.states.clone(),
        actions: grid.actions.clone(),
        q: agent.critic.predict(&grid.state_actions(), n)?,
        pi: agent.policy_batch(&grid.states)?,
    })
}

/// Snapshot of arbitrary analytic critic and policy functions.
pub fn analytic_snapshot(
    grid: &ProbeGrid,
    step: u64,
    q: impl Fn(f64, f64) -> f64,
    pi: impl Fn(f64) -> f64,
) -> CriticSnapshot {
    let mut values = Vec::with_capacity(grid.states.len() * grid.actions.len());
    for &s in &grid.states {
        for &a in &grid.actions {
            values.push(q(s, a));
        }
    }
    CriticSnapshot {
        step,
        states: grid.states.clone(),
        actions: grid.actions.clone(),
        q: values,
        pi: grid.states.iter().map(|&s| pi(s)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: u64,
    pub max_abs_q: f64,
    pub max_abs_pi: f64,
}

/// Rewarded samples drawn during the training phase that follows one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCount {
    pub episode: u64,
    /// Environment step at which the episode ended.
    pub end_step: u64,
    /// Training iterations in the phase (= episode length).
    pub iterations: u32,
    pub rewarded: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub success: bool,
    pub success_step: Option<u64>,
    /// Step at which the first rewarded transition entered the buffer.
    pub first_reward_step: Option<u64>,
    pub diverged: bool,
    pub divergence: Option<String>,
    pub steps_run: u64,
    pub episodes: u64,
    /// Total rewarded samples drawn over all minibatches.
    pub rewarded_samples_drawn: u64,
    pub rewarded_per_training_phase: Vec<PhaseCount>,
    pub trace: Vec<TracePoint>,
    /// Mean of `pi(s)` over the probe states at the end of the run; NaN if
    /// the actor diverged.
    #[serde(with = "nan_as_null")]
    pub final_policy_mean_action: f64,
    pub critic_snapshots: Vec<CriticSnapshot>,
}

impl RunMetrics {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            success: false,
            success_step: None,
            first_reward_step: None,
            diverged: false,
            divergence: None,
            steps_run: 0,
            episodes: 0,
            rewarded_samples_drawn: 0,
            rewarded_per_training_phase: Vec::new(),
            trace: Vec::new(),
            final_policy_mean_action: f64::NAN,
            critic_snapshots: Vec::new(),
        }
    }

    /// Neither succeeded nor diverged.
    pub fn failed(&self) -> bool {
        !self.success && !self.diverged
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

pub(crate) fn trace_point(agent: &Agent, grid: &ProbeGrid, step: u64) -> Result<TracePoint> {
    let n = grid.states.len() * grid.actions.len();
    let q = agent.critic.predict(&grid.state_actions(), n)?;
    let pi = agent.policy_batch(&grid.states)?;
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let point = TracePoint {
        step,
        max_abs_q: max_abs(&q),
        max_abs_pi: max_abs(&pi),
    };
    if !(point.max_abs_q.is_finite() && point.max_abs_pi.is_finite()) {
        return Err(Error::NonFinite("probe-grid evaluation".into()));
    }
    Ok(point)
}

fn mean_policy(agent: &Agent, grid: &ProbeGrid) -> f64 {
    agent
        .policy_batch(&grid.states)
        .map(|pi| pi.iter().sum::<f64>() / pi.len() as f64)
        .unwrap_or(f64::NAN)
}

/// Does the noise-free actor collect the reward within one episode from `s0`?
pub fn greedy_episode_succeeds(agent: &Agent, config: &RunConfig) -> Result<bool> {
    let mut episode = Episode::new(config.env_spec());
    loop {
        let a = agent.policy(episode.state())?;
        if !a.is_finite() {
            return Err(Error::NonFinite("actor output".into()));
        }
        let out = episode.step(a)?;
        if out.transition.rewarded() {
            return Ok(true);
        }
        if out.done {
            return Ok(false);
        }
    }
}

struct RunRngs {
    noise: Rng,
    minibatch: Rng,
    candidates: Rng,
}

/// Runs the episodic training loop for `config`. Divergence (non-finite values)
/// is recorded in the metrics; other errors are returned.
pub fn run_training(config: &RunConfig) -> Result<RunMetrics> {
    let (metrics, _) = run_training_with_agent(config)?;
    Ok(metrics)
}

/// [`run_training`] that also hands back the final agent.
pub fn run_training_with_agent(config: &RunConfig) -> Result<(RunMetrics, Agent)> {
    config.validate()?;
    let streams = SeedStreams::new(config.seed);
    let mut agent = Agent::new(config.agent_config(), &mut streams.stream(Stream::Init))?;
    let mut rngs = RunRngs {
        noise: streams.stream(Stream::Noise),
        minibatch: streams.stream(Stream::Minibatch),
        candidates: streams.stream(Stream::Candidates),
    };
    let grid = ProbeGrid::default();
    let mut metrics = RunMetrics::new(config.seed);
    match training_loop(config, &mut agent, &mut rngs, &grid, &mut metrics) {
        Ok(()) => {}
        Err(e) if e.is_divergence() => {
            metrics.diverged = true;
            metrics.divergence = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    metrics.final_policy_mean_action = mean_policy(&agent, &grid);
    if config.snapshot_failed_runs && metrics.failed() {
        metrics
            .critic_snapshots
            .push(export_critic_snapshot(&agent, &grid, metrics.steps_run)?);
    }
    Ok((metrics, agent))
}

fn training_loop(
    config: &RunConfig,
    agent: &mut Agent,
    rngs: &mut RunRngs,
    grid: &ProbeGrid,
    metrics: &mut RunMetrics,
) -> Result<()> {
    let mut episode = Episode::new(config.env_spec());
    let mut recent: VecDeque<bool> = VecDeque::with_capacity(config.success_window + 1);
    let mut episode_rewarded = false;
    agent.noise.reset();

    for t in 1..=config.total_steps {
        metrics.steps_run = t;
        let substituted = config.substitute_optimal_at.is_some_and(|k| t > k);
        let s = episode.state();
        let a = if substituted {
            env::optimal_action(s)
        } else {
            agent.select_action(s, &mut rngs.noise)?.action
        };
        let out = episode.step(a)?;
        agent.buffer.push(out.transition);
        if out.transition.rewarded() {
            episode_rewarded = true;
            metrics.first_reward_step.get_or_insert(t);
        }

        if out.done {
            let iterations = episode.steps();
            let mut rewarded = 0u64;
            for _ in 0..iterations {
                let stats = agent.train_iteration(
                    &mut rngs.minibatch,
                    &mut rngs.candidates,
                    config.critic_updates_per_step,
                    config.actor_updates_per_step,
                )?;
                rewarded += stats.rewarded_in_batch as u64;
            }
            metrics.rewarded_samples_drawn += rewarded;
            metrics.rewarded_per_training_phase.push(PhaseCount {
                episode: metrics.episodes,
                end_step: t,
                iterations,
                rewarded,
            });
            metrics.episodes += 1;
            recent.push_back(episode_rewarded);
            if recent.len() > config.success_window {
                recent.pop_front();
            }
            episode.reset();
            agent.noise.reset();
            episode_rewarded = false;
        }

        if config.snapshot_steps.contains(&t) {
            metrics.critic_snapshots.push(export_critic_snapshot(agent, grid, t)?);
        }
        if config.trace_interval > 0 && t % config.trace_interval == 0 {
            metrics.trace.push(trace_point(agent, grid, t)?);
        }
        if t % config.success_check_interval == 0 {
            // Once the optimal policy drives behaviour every episode is
            // rewarded, so success is judged on the actor itself.
            let succeeded = if substituted {
                greedy_episode_succeeds(agent, config)?
            } else {
                recent.len() == config.success_window && recent.iter().all(|&r| r)
            };
            if succeeded {
                metrics.success = true;
                metrics.success_step = Some(t);
                return Ok(());
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftResult {
    pub seed: u64,
    pub trace: Vec<TracePoint>,
    #[serde(with = "nan_as_null")]
    pub final_policy_mean_action: f64,
    pub diverged: bool,
}

impl DriftResult {
    /// Step of the first trace point with `max|pi| >= threshold`.
    pub fn saturation_step(&self, threshold: f64) -> Option<u64> {
        self.trace.iter().find(|p| p.max_abs_pi >= threshold).map(|p| p.step)
    }

    pub fn drifted_right(&self) -> bool {
        self.final_policy_mean_action > 0.0
    }

    /// `(max - min) / |last|` of `max|Q|` over trace points in the last
    /// `window` steps.
    pub fn final_q_relative_change(&self, window: u64) -> f64 {
        let Some(last) = self.trace.last() else {
            return f64::NAN;
        };
        let from = last.step.saturating_sub(window);
        let tail: Vec<f64> = self.trace.iter().filter(|p| p.step >= from).map(|p| p.max_abs_q).collect();
        let hi = tail.iter().cloned().fold(f64::MIN, f64::max);
        let lo = tail.iter().cloned().fold(f64::MAX, f64::min);
        (hi - lo) / last.max_abs_q.abs()
    }
}

/// Reward-free training on uniformly sampled drift transitions, no rollouts.
/// Records the probe-grid trace every `trace_interval` steps (10 if unset).
pub fn run_drift(config: &RunConfig) -> Result<DriftResult> {
    config.validate()?;
    if config.env != env::EnvKind::Drift {
        return Err(Error::Config("run_drift requires env = drift".into()));
    }
    let streams = SeedStreams::new(config.seed);
    let mut agent = Agent::new(config.agent_config(), &mut streams.stream(Stream::Init))?;
    let mut samples = streams.stream(Stream::DriftSamples);
    let mut candidates = streams.stream(Stream::Candidates);
    let grid = ProbeGrid::default();
    let interval = if config.trace_interval == 0 { 10 } else { config.trace_interval };
    let mut trace = Vec::with_capacity((config.total_steps / interval) as usize);
    let mut diverged = false;
    for t in 1..=config.total_steps {
        let batch: Batch = (0..config.batch_size).map(|_| env::drift_sample(&mut samples)).collect();
        let step = agent
            .train_on_batch(
                &batch,
                &mut candidates,
                config.critic_updates_per_step,
                config.actor_updates_per_step,
            )
            .and_then(|_| {
                if t % interval == 0 {
                    trace.push(trace_point(&agent, &grid, t)?);
                }
                Ok(())
            });
        match step {
            Ok(()) => {}
            Err(e) if e.is_divergence() => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(DriftResult {
        seed: config.seed,
        trace,
        final_policy_mean_action: mean_policy(&agent, &grid),
        diverged,
    })
}
