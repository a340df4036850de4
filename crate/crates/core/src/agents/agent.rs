//! Actor-critic learner state and its update rules.
//!
//! All three learners share the critic update: a minibatch is regressed onto
//! `y = r + gamma * (1 - t) * Q'(s', pi'(s'))` computed with the target networks.
//! They differ only in how the actor moves:
//!
//! - `dpg`: deterministic policy gradient, ascent on `Q(s, pi(s))`.
//! - `argmax`: regress `pi(s)` onto the best of K uniformly drawn candidates.
//! - `regression`: regress `pi(s_i)` onto the stored action `a_i` whenever the
//!   target beats the critic's value of the current policy, `y_i > Q(s_i, pi(s_i))`.
//!
//! Losses are averaged over the minibatch rather than summed.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::agents::buffer::{interleave, Batch, ReplayBuffer};
use crate::agents::noise::{NoiseProcess, NoiseSpec, NoisyAction};
use crate::env::ACTION_LIMIT;
use crate::error::{Error, Result};
use crate::net::{polyak_update, Activation, AdamConfig, AdamState, MlpParams, OutputTransform, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ActorUpdateRule {
    Dpg,
    Argmax { candidates: usize },
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub hidden_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub gamma: f64,
    pub polyak: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actor_adam: AdamConfig,
    pub critic_adam: AdamConfig,
    pub rule: ActorUpdateRule,
    pub noise: NoiseSpec,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64, 64],
            hidden_activation: Activation::Relu,
            gamma: 0.99,
            polyak: 0.995,
            batch_size: 100,
            buffer_capacity: 1_000_000,
            actor_adam: AdamConfig::default(),
            critic_adam: AdamConfig::default(),
            rule: ActorUpdateRule::Dpg,
            noise: NoiseSpec::Probabilistic { p: NoiseSpec::DEFAULT_P },
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma={} must lie in [0, 1)", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.polyak) {
            return Err(Error::Config(format!("polyak={} must lie in [0, 1]", self.polyak)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if let ActorUpdateRule::Argmax { candidates: 0 } = self.rule {
            return Err(Error::Config("argmax needs at least one candidate".into()));
        }
        for adam in [&self.actor_adam, &self.critic_adam] {
            if !(adam.learning_rate > 0.0) {
                return Err(Error::Config("learning rates must be positive".into()));
            }
        }
        self.noise.validate()
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        std::iter::once(1)
            .chain(self.hidden_sizes.iter().copied())
            .chain(std::iter::once(1))
            .collect()
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        std::iter::once(2)
            .chain(self.hidden_sizes.iter().copied())
            .chain(std::iter::once(1))
            .collect()
    }
}

/// Per-iteration bookkeeping returned by [`Agent::train_on_batch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub rewarded_in_batch: usize,
    /// Pre-step loss of the last critic update, if any ran.
    pub critic_loss: Option<f64>,
    /// Rule-specific actor statistic of the last actor update, if any ran:
    /// mean |dQ/da| for `dpg`, the regression loss otherwise.
    pub actor_stat: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub actor: MlpParams,
    pub critic: MlpParams,
    pub target_actor: MlpParams,
    pub target_critic: MlpParams,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub buffer: ReplayBuffer,
    pub noise: NoiseProcess,
}

impl Agent {
    /// Xavier-initialized actor and critic; targets start as exact copies.
    pub fn new(config: AgentConfig, init_rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let actor = MlpParams::init_xavier(
            &config.actor_sizes(),
            config.hidden_activation,
            OutputTransform::ScaledTanh { limit: ACTION_LIMIT },
            init_rng,
        )?;
        let critic = MlpParams::init_xavier(
            &config.critic_sizes(),
            config.hidden_activation,
            OutputTransform::Identity,
            init_rng,
        )?;
        Self::from_networks(config, actor, critic)
    }

    /// Builds an agent around given networks (hand-built critics in tests and
    /// oracle comparisons). The actor must map 1 -> 1 and the critic 2 -> 1.
    pub fn from_networks(config: AgentConfig, actor: MlpParams, critic: MlpParams) -> Result<Self> {
        config.validate()?;
        if actor.input_dim() != 1 || actor.output_dim() != 1 {
            return Err(Error::ShapeMismatch(format!("actor must be 1 -> 1, got {:?}", actor.layer_sizes())));
        }
        if critic.input_dim() != 2 || critic.output_dim() != 1 {
            return Err(Error::ShapeMismatch(format!("critic must be 2 -> 1, got {:?}", critic.layer_sizes())));
        }
        Ok(Self {
            actor_opt: AdamState::new(&actor, config.actor_adam),
            critic_opt: AdamState::new(&critic, config.critic_adam),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            noise: NoiseProcess::new(config.noise),
            actor,
            critic,
            config,
        })
    }

    pub fn policy(&self, s: f64) -> Result<f64> {
        self.actor.predict_one(&[s])
    }

    /// Actor outputs for a slice of states.
    pub fn policy_batch(&self, states: &[f64]) -> Result<Vec<f64>> {
        self.actor.predict(states, states.len())
    }

    pub fn q_value(&self, s: f64, a: f64) -> Result<f64> {
        self.critic.predict_one(&[s, a])
    }

    /// Behaviour policy: the actor's action passed through the noise process.
    pub fn select_action(&mut self, s: f64, rng: &mut Rng) -> Result<NoisyAction> {
        let a = self.policy(s)?;
        if !a.is_finite() {
            return Err(Error::NonFinite("actor output".into()));
        }
        Ok(self.noise.apply(a, rng))
    }

    /// TD targets from the target networks.
    pub fn critic_targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::ShapeMismatch("empty minibatch".into()));
        }
        let n = batch.len();
        let next_actions = self.target_actor.predict(&batch.s_next, n)?;
        let next_q = self.target_critic.predict(&interleave(&batch.s_next, &next_actions), n)?;
        let y = td_targets(&batch.r, &batch.terminal, self.config.gamma, &next_q);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("critic targets".into()));
        }
        Ok(y)
    }

    /// One Adam step on the critic against mean squared TD error; returns the
    /// pre-step loss.
    pub fn critic_update(&mut self, batch: &Batch) -> Result<f64> {
        let y = self.critic_targets(batch)?;
        self.critic_update_with_targets(batch, &y)
    }

    pub fn critic_update_with_targets(&mut self, batch: &Batch, targets: &[f64]) -> Result<f64> {
        let n = batch.len();
        if n == 0 || targets.len() != n {
            return Err(Error::ShapeMismatch(format!("{} targets for batch of {n}", targets.len())));
        }
        let cache = self.critic.forward(&batch.state_actions(), n)?;
        let residual: Vec<f64> = cache.output().iter().zip(targets).map(|(q, y)| q - y).collect();
        let loss = residual.iter().map(|d| d * d).sum::<f64>() / n as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("critic loss".into()));
        }
        let out_grad: Vec<f64> = residual.iter().map(|d| 2.0 * d / n as f64).collect();
        let (grads, _) = self.critic.backward(&cache, &out_grad)?;
        self.critic_opt.step(&mut self.critic, &grads)?;
        Ok(loss)
    }

    /// `dQ/da` at `(s_i, a_i)` for every row, using the online critic.
    pub fn action_gradients(&self, states: &[f64], actions: &[f64]) -> Result<Vec<f64>> {
        let n = states.len();
        let cache = self.critic.forward(&interleave(states, actions), n)?;
        let dx = self.critic.input_gradient(&cache, &vec![1.0; n])?;
        Ok(dx.chunks_exact(2).map(|row| row[1]).collect())
    }

    /// Deterministic policy gradient step. Returns the batch mean of
    /// `|dQ/da|` at `a = pi(s)`, the quantity that vanishes in a deadlock.
    pub fn actor_update_dpg(&mut self, batch: &Batch) -> Result<f64> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::ShapeMismatch("empty minibatch".into()));
        }
        let actor_cache = self.actor.forward(&batch.s, n)?;
        let dq_da = self.action_gradients(&batch.s, actor_cache.output())?;
        // Loss is -mean Q(s, pi(s)).
        let out_grad: Vec<f64> = dq_da.iter().map(|g| -g / n as f64).collect();
        let (grads, _) = self.actor.backward(&actor_cache, &out_grad)?;
        self.actor_opt.step(&mut self.actor, &grads)?;
        Ok(dq_da.iter().map(|g| g.abs()).sum::<f64>() / n as f64)
    }

    /// Best candidate per state under the online critic. Ties go to the lowest
    /// candidate index.
    pub fn argmax_targets(&self, states: &[f64], candidates: &[f64]) -> Result<Vec<f64>> {
        let k = candidates.len();
        if k == 0 {
            return Err(Error::Config("argmax needs at least one candidate".into()));
        }
        let mut rows = Vec::with_capacity(states.len() * k * 2);
        for &s in states {
            for &b in candidates {
                rows.push(s);
                rows.push(b);
            }
        }
        let q = self.critic.predict(&rows, states.len() * k)?;
        Ok(best_candidates(&q, candidates))
    }

    /// Squared-error regression of `pi(s_i)` toward `goal_i` on rows where
    /// `mask_i` holds, averaged over the whole batch. No step is taken when
    /// the mask is empty.
    fn regress_actor(&mut self, states: &[f64], goals: &[f64], mask: Option<&[bool]>) -> Result<f64> {
        let n = states.len();
        let cache = self.actor.forward(states, n)?;
        let mut loss = 0.0;
        let mut active = 0;
        let out_grad: Vec<f64> = cache
            .output()
            .iter()
            .zip(goals)
            .enumerate()
            .map(|(i, (pi, goal))| {
                if mask.is_some_and(|m| !m[i]) {
                    return 0.0;
                }
                active += 1;
                let d = pi - goal;
                loss += d * d;
                2.0 * d / n as f64
            })
            .collect();
        if active == 0 {
            return Ok(0.0);
        }
        let loss = loss / n as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("actor regression loss".into()));
        }
        let (grads, _) = self.actor.backward(&cache, &out_grad)?;
        self.actor_opt.step(&mut self.actor, &grads)?;
        Ok(loss)
    }

    /// Candidate-argmax actor update with fresh uniform candidates shared by
    /// every row of the batch. Returns the pre-step regression loss.
    pub fn actor_update_argmax(&mut self, batch: &Batch, candidates: usize, rng: &mut Rng) -> Result<f64> {
        let cands: Vec<f64> = (0..candidates)
            .map(|_| rng.random_range(-ACTION_LIMIT..=ACTION_LIMIT))
            .collect();
        self.actor_update_argmax_with(batch, &cands)
    }

    pub fn actor_update_argmax_with(&mut self, batch: &Batch, candidates: &[f64]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::ShapeMismatch("empty minibatch".into()));
        }
        let goals = self.argmax_targets(&batch.s, candidates)?;
        self.regress_actor(&batch.s, &goals, None)
    }

    /// Regression of `pi(s_i)` toward the stored action `a_i` on rows with
    /// `y_i > Q(s_i, pi(s_i))` (strict). `targets` must come from
    /// [`critic_targets`](Self::critic_targets) on the same batch.
    pub fn actor_update_regression(&mut self, batch: &Batch, targets: &[f64]) -> Result<f64> {
        let n = batch.len();
        if n == 0 || targets.len() != n {
            return Err(Error::ShapeMismatch(format!("{} targets for batch of {n}", targets.len())));
        }
        let pi = self.actor.predict(&batch.s, n)?;
        let q_pi = self.critic.predict(&interleave(&batch.s, &pi), n)?;
        let mask: Vec<bool> = targets.iter().zip(&q_pi).map(|(y, q)| y > q).collect();
        self.regress_actor(&batch.s, &batch.a, Some(&mask))
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        polyak_update(&mut self.target_actor, &self.actor, self.config.polyak)?;
        polyak_update(&mut self.target_critic, &self.critic, self.config.polyak)
    }

    /// One training iteration on a given batch: `critic_updates` critic steps,
    /// then `actor_updates` actor steps, then one target update.
    pub fn train_on_batch(
        &mut self,
        batch: &Batch,
        candidate_rng: &mut Rng,
        critic_updates: u32,
        actor_updates: u32,
    ) -> Result<IterationStats> {
        let targets = self.critic_targets(batch)?;
        let mut critic_loss = None;
        for _ in 0..critic_updates {
            critic_loss = Some(self.critic_update_with_targets(batch, &targets)?);
        }
        let mut actor_stat = None;
        for _ in 0..actor_updates {
            actor_stat = Some(match self.config.rule {
                ActorUpdateRule::Dpg => self.actor_update_dpg(batch)?,
                ActorUpdateRule::Argmax { candidates } => self.actor_update_argmax(batch, candidates, candidate_rng)?,
                ActorUpdateRule::Regression => self.actor_update_regression(batch, &targets)?,
            });
        }
        self.soft_update_targets()?;
        Ok(IterationStats {
            rewarded_in_batch: batch.rewarded_count(),
            critic_loss,
            actor_stat,
        })
    }

    /// Samples a minibatch from the replay buffer and trains on it.
    pub fn train_iteration(
        &mut self,
        minibatch_rng: &mut Rng,
        candidate_rng: &mut Rng,
        critic_updates: u32,
        actor_updates: u32,
    ) -> Result<IterationStats> {
        let batch = self.buffer.sample(self.config.batch_size, minibatch_rng)?;
        self.train_on_batch(&batch, candidate_rng, critic_updates, actor_updates)
    }
}

/// For each row of `q` (one value per candidate), the candidate with the
/// largest value; the lowest index wins ties.
pub fn best_candidates(q: &[f64], candidates: &[f64]) -> Vec<f64> {
    q.chunks_exact(candidates.len())
        .map(|qs| {
            let mut best = 0;
            for (j, &v) in qs.iter().enumerate().skip(1) {
                if v > qs[best] {
                    best = j;
                }
            }
            candidates[best]
        })
        .collect()
}

/// `y_i = r_i + gamma * (1 - t_i) * next_q_i`. Terminal rows return `r_i`
/// without touching `next_q_i`, so no value of the target critic can leak in.
pub fn td_targets(rewards: &[f64], terminal: &[bool], gamma: f64, next_q: &[f64]) -> Vec<f64> {
    rewards
        .iter()
        .zip(terminal)
        .zip(next_q)
        .map(|((&r, &t), &q)| if t { r } else { r + gamma * q })
        .collect()
}
