//! Run configuration: one flat JSON object, one key per field.

use serde::{Deserialize, Serialize};

use crate::agents::{ActorUpdateRule, AgentConfig, NoiseSpec};
use crate::env::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::net::{Activation, AdamConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Ddpg,
    DdpgArgmax,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Probabilistic,
    Ou,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvKind,
    pub max_episode_length: u32,

    pub agent: AgentKind,
    pub argmax_candidates: usize,
    pub hidden_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub gamma: f64,
    pub polyak: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,

    pub noise: NoiseKind,
    pub noise_p: f64,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_dt: f64,

    pub actor_updates_per_step: u32,
    pub critic_updates_per_step: u32,
    pub total_steps: u64,
    pub success_check_interval: u64,
    pub success_window: usize,
    /// After this step the behaviour policy is the optimal one, without noise.
    pub substitute_optimal_at: Option<u64>,
    pub seed: u64,

    /// Steps at which a critic/actor snapshot over the probe grid is taken.
    pub snapshot_steps: Vec<u64>,
    /// Take a final snapshot of every run that ends without success.
    pub snapshot_failed_runs: bool,
    /// Record max|Q| and max|pi| over the probe grid every this many steps (0 = off).
    pub trace_interval: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::OneDToy,
            max_episode_length: 50,
            agent: AgentKind::Ddpg,
            argmax_candidates: 100,
            hidden_sizes: vec![64, 64],
            hidden_activation: Activation::Relu,
            gamma: 0.99,
            polyak: 0.995,
            batch_size: 100,
            buffer_capacity: 1_000_000,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            noise: NoiseKind::Probabilistic,
            noise_p: NoiseSpec::DEFAULT_P,
            ou_theta: NoiseSpec::DEFAULT_OU_THETA,
            ou_sigma: NoiseSpec::DEFAULT_OU_SIGMA,
            ou_dt: NoiseSpec::DEFAULT_OU_DT,
            actor_updates_per_step: 1,
            critic_updates_per_step: 1,
            total_steps: 100_000,
            success_check_interval: 1000,
            success_window: 20,
            substitute_optimal_at: None,
            seed: 0,
            snapshot_steps: Vec::new(),
            snapshot_failed_runs: false,
            trace_interval: 0,
        }
    }
}

/// Keys whose default values are assumptions rather than documented settings.
/// Echoed in run outputs so they can be audited.
pub const ASSUMED_DEFAULT_KEYS: &[&str] = &[
    "hidden_sizes",
    "hidden_activation",
    "actor_lr",
    "critic_lr",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "buffer_capacity",
    "ou_theta",
    "ou_sigma",
    "ou_dt",
    "gamma",
    "polyak",
];

/// Losses are averaged over the minibatch; recorded in outputs.
pub const LOSS_REDUCTION: &str = "mean";

impl RunConfig {
    pub fn env_spec(&self) -> EnvSpec {
        EnvSpec {
            kind: self.env,
            max_episode_length: self.max_episode_length,
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        match self.noise {
            NoiseKind::None => NoiseSpec::None,
            NoiseKind::Probabilistic => NoiseSpec::Probabilistic { p: self.noise_p },
            NoiseKind::Ou => NoiseSpec::Ou {
                theta: self.ou_theta,
                sigma: self.ou_sigma,
                dt: self.ou_dt,
            },
        }
    }

    pub fn actor_rule(&self) -> ActorUpdateRule {
        match self.agent {
            AgentKind::Ddpg => ActorUpdateRule::Dpg,
            AgentKind::DdpgArgmax => ActorUpdateRule::Argmax {
                candidates: self.argmax_candidates,
            },
            AgentKind::Regression => ActorUpdateRule::Regression,
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        let adam = |lr| AdamConfig {
            learning_rate: lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        };
        AgentConfig {
            hidden_sizes: self.hidden_sizes.clone(),
            hidden_activation: self.hidden_activation,
            gamma: self.gamma,
            polyak: self.polyak,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            actor_adam: adam(self.actor_lr),
            critic_adam: adam(self.critic_lr),
            rule: self.actor_rule(),
            noise: self.noise_spec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be at least 1".into()));
        }
        if self.max_episode_length == 0 {
            return Err(Error::Config("max_episode_length must be at least 1".into()));
        }
        if self.success_check_interval == 0 {
            return Err(Error::Config("success_check_interval must be at least 1".into()));
        }
        if self.success_window == 0 {
            return Err(Error::Config("success_window must be at least 1".into()));
        }
        self.agent_config().validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides on top of this config. Values are parsed
    /// as JSON when possible and otherwise taken as strings; unknown keys are
    /// rejected.
    pub fn with_overrides<'a, I>(&self, overrides: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut object = match serde_json::to_value(self).expect("config serializes") {
            serde_json::Value::Object(map) => map,
            _ => unreachable!("config is a JSON object"),
        };
        for (key, raw) in overrides {
            if !object.contains_key(key) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
            let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            object.insert(key.to_string(), value);
        }
        let cfg: RunConfig = serde_json::from_value(serde_json::Value::Object(object))
            .map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Splits `key=value`.
pub fn parse_override(text: &str) -> Result<(&str, &str)> {
    text.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Error::Config(format!("override `{text}` is not key=value")))
}
