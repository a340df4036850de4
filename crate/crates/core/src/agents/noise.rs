//! Behaviour-policy noise: uniform replacement ("probabilistic" noise) and a
//! clipped Ornstein-Uhlenbeck process that restarts at zero every episode.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::ACTION_LIMIT;
use crate::error::{Error, Result};
use crate::net::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    None,
    /// With probability `p` the actor is ignored and a uniform action is taken.
    Probabilistic { p: f64 },
    Ou { theta: f64, sigma: f64, dt: f64 },
}

impl NoiseSpec {
    pub const DEFAULT_P: f64 = 0.1;
    pub const DEFAULT_OU_THETA: f64 = 0.15;
    pub const DEFAULT_OU_SIGMA: f64 = 0.2 * ACTION_LIMIT;
    pub const DEFAULT_OU_DT: f64 = 1.0;

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::None => Ok(()),
            NoiseSpec::Probabilistic { p } if (0.0..=1.0).contains(&p) => Ok(()),
            NoiseSpec::Probabilistic { p } => Err(Error::Config(format!("noise p={p} outside [0, 1]"))),
            NoiseSpec::Ou { theta, sigma, dt } => {
                if theta > 0.0 && sigma >= 0.0 && dt > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("invalid OU parameters theta={theta} sigma={sigma} dt={dt}")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProcess {
    spec: NoiseSpec,
    ou_state: f64,
}

/// The action actually executed and whether noise replaced the actor's choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyAction {
    pub action: f64,
    pub replaced: bool,
}

impl NoiseProcess {
    pub fn new(spec: NoiseSpec) -> Self {
        Self { spec, ou_state: 0.0 }
    }

    pub fn spec(&self) -> NoiseSpec {
        self.spec
    }

    pub fn ou_state(&self) -> f64 {
        self.ou_state
    }

    /// Called at every episode start.
    pub fn reset(&mut self) {
        self.ou_state = 0.0;
    }

    pub fn apply(&mut self, actor_action: f64, rng: &mut Rng) -> NoisyAction {
        match self.spec {
            NoiseSpec::None => NoisyAction {
                action: actor_action,
                replaced: false,
            },
            NoiseSpec::Probabilistic { p } => {
                if rng.random::<f64>() < p {
                    NoisyAction {
                        action: rng.random_range(-ACTION_LIMIT..=ACTION_LIMIT),
                        replaced: true,
                    }
                } else {
                    NoisyAction {
                        action: actor_action,
                        replaced: false,
                    }
                }
            }
            NoiseSpec::Ou { theta, sigma, dt } => {
                let z: f64 = rng.sample(StandardNormal);
                self.ou_state += -theta * self.ou_state * dt + sigma * dt.sqrt() * z;
                NoisyAction {
                    action: (actor_action + self.ou_state).clamp(-ACTION_LIMIT, ACTION_LIMIT),
                    replaced: false,
                }
            }
        }
    }
}
