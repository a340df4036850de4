//! A small laboratory for the DDPG deadlock on a 1D sparse-reward task.
//!
//! - [`net`]: dense networks with analytic gradients, Adam and target smoothing.
//! - [`env`]: the 1D toy task and its reward-free drift variant.
//! - [`agents`]: replay buffer, noise processes, DDPG / argmax / regression learners.
//! - [`oracle`]: exact policy values and executable checks of the deadlock theory.
//! - [`harness`]: training loop, seed sweeps, drift runs, metrics and file output.
//! - [`cli`]: the `deadlock-lab` command line.

pub mod agents;
pub mod cli;
pub mod env;
pub mod error;
pub mod harness;
pub mod net;
pub mod oracle;

pub use error::{Error, Result};
