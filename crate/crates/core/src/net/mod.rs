//! Minimal dense network engine: Xavier init, batched forward/backward, Adam,
//! target smoothing and a finite-difference gradient checker.

pub mod adam;
pub mod gradcheck;
pub mod mlp;
pub mod rng;

pub use adam::{polyak_update, AdamConfig, AdamState};
pub use gradcheck::{gradient_check, random_gradient_checks, GradCheckReport};
pub use mlp::{Activation, ForwardCache, Gradients, MlpParams, OutputTransform};
pub use rng::{Rng, SeedStreams, Stream};
