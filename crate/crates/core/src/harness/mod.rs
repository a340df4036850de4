//! Experiment harness: configuration, training and drift loops, seed sweeps,
//! post-hoc analysis and output files.

pub mod analysis;
pub mod config;
pub mod io;
pub mod run;
pub mod sweep;

pub use config::{parse_override, AgentKind, NoiseKind, RunConfig, ASSUMED_DEFAULT_KEYS, LOSS_REDUCTION};
pub use run::{
    analytic_snapshot, export_critic_snapshot, run_drift, run_training, run_training_with_agent, CriticSnapshot,
    DriftResult, PhaseCount, ProbeGrid, RunMetrics, TracePoint,
};
pub use sweep::{run_drift_sweep, run_sweep, success_curve, SweepSummary};
