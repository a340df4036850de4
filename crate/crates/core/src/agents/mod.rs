//! Replay memory, exploration noise and the actor-critic learners.

pub mod agent;
pub mod buffer;
pub mod noise;

pub use agent::{best_candidates, td_targets, ActorUpdateRule, Agent, AgentConfig, IterationStats};
pub use buffer::{Batch, ReplayBuffer};
pub use noise::{NoiseProcess, NoiseSpec, NoisyAction};
