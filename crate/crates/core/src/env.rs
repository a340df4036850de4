//! The 1D sparse-reward toy and its reward-free drift variant.
//!
//! `S = [0, 1]`, `A = [-0.1, 0.1]`, every episode starts at `s = 0`, the next
//! state is `clip(s + a, 0, 1)` and a transition is rewarded (and terminal)
//! exactly when `s + a < 0`. The drift variant shares the dynamics but never
//! rewards or terminates.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Rng;

pub const ACTION_LIMIT: f64 = 0.1;
pub const STATE_MIN: f64 = 0.0;
pub const STATE_MAX: f64 = 1.0;
pub const INITIAL_STATE: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    OneDToy,
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub max_episode_length: u32,
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self {
            kind: EnvKind::OneDToy,
            max_episode_length: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: f64,
    pub a: f64,
    pub r: f64,
    /// Environment termination only; time-limit truncation is never stored here.
    pub terminal: bool,
    pub s_next: f64,
}

impl Transition {
    pub fn rewarded(&self) -> bool {
        self.r > 0.0
    }
}

/// Deterministic dynamics. `s + a < 0` is evaluated in double precision.
pub fn step(kind: EnvKind, s: f64, a: f64) -> Result<Transition> {
    if !(STATE_MIN..=STATE_MAX).contains(&s) {
        return Err(Error::OutOfRange(format!("state {s} outside [0, 1]")));
    }
    if !(-ACTION_LIMIT..=ACTION_LIMIT).contains(&a) {
        return Err(Error::OutOfRange(format!("action {a} outside [-0.1, 0.1]")));
    }
    Ok(step_unchecked(kind, s, a))
}

pub(crate) fn step_unchecked(kind: EnvKind, s: f64, a: f64) -> Transition {
    let sum = s + a;
    let hit = kind == EnvKind::OneDToy && sum < 0.0;
    Transition {
        s,
        a,
        r: if hit { 1.0 } else { 0.0 },
        terminal: hit,
        s_next: sum.clamp(STATE_MIN, STATE_MAX),
    }
}

pub fn reset(_spec: &EnvSpec) -> f64 {
    INITIAL_STATE
}

/// Uniform state and action, stepped through the drift dynamics.
pub fn drift_sample(rng: &mut Rng) -> Transition {
    let s = rng.random_range(STATE_MIN..=STATE_MAX);
    let a = rng.random_range(-ACTION_LIMIT..=ACTION_LIMIT);
    step_unchecked(EnvKind::Drift, s, a)
}

/// The optimal policy: always step left.
pub fn optimal_action(_s: f64) -> f64 {
    -ACTION_LIMIT
}

/// Outcome of feeding one action into an [`Episode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub transition: Transition,
    /// True when the episode ends, by termination or by reaching the length cap.
    pub done: bool,
    pub truncated: bool,
}

/// Episode bookkeeping: current state and the step counter toward the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    spec: EnvSpec,
    state: f64,
    steps: u32,
}

impl Episode {
    pub fn new(spec: EnvSpec) -> Self {
        Self {
            spec,
            state: reset(&spec),
            steps: 0,
        }
    }

    pub fn state(&self) -> f64 {
        self.state
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn reset(&mut self) {
        self.state = reset(&self.spec);
        self.steps = 0;
    }

    pub fn step(&mut self, a: f64) -> Result<StepOutcome> {
        let transition = step(self.spec.kind, self.state, a)?;
        self.state = transition.s_next;
        self.steps += 1;
        let truncated = !transition.terminal && self.steps >= self.spec.max_episode_length;
        Ok(StepOutcome {
            transition,
            done: transition.terminal || truncated,
            truncated,
        })
    }
}
