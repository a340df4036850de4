//! Post-hoc metrics over finished runs and sweeps.

use serde::{Deserialize, Serialize};

use crate::harness::run::{CriticSnapshot, RunMetrics};

/// Rewarded samples drawn in each post-episode training phase, in order.
pub fn count_rewarded_in_minibatches(run: &RunMetrics) -> Vec<u64> {
    run.rewarded_per_training_phase.iter().map(|p| p.rewarded).collect()
}

/// Mean rewarded samples per phase over phases of exactly `episode_length`
/// iterations that end in the second half of the run.
pub fn steady_state_mean_per_phase(run: &RunMetrics, episode_length: u32) -> Option<f64> {
    let from = run.steps_run / 2;
    let counts: Vec<u64> = run
        .rewarded_per_training_phase
        .iter()
        .filter(|p| p.end_step > from && p.iterations == episode_length)
        .map(|p| p.rewarded)
        .collect();
    if counts.is_empty() {
        None
    } else {
        Some(counts.iter().sum::<u64>() as f64 / counts.len() as f64)
    }
}

/// Default first-reward bins: the first episode `[0, 50]`, the next three
/// episodes `(50, 200]`, and everything later.
pub const DEFAULT_FIRST_REWARD_EDGES: &[u64] = &[50, 200];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstRewardBin {
    /// Exclusive lower edge; `None` for the first bin (which includes 0).
    pub after: Option<u64>,
    /// Inclusive upper edge; `None` for the open last bin.
    pub up_to: Option<u64>,
    pub count: usize,
    pub failures: usize,
    /// `None` when the bin is empty.
    pub failure_fraction: Option<f64>,
}

impl FirstRewardBin {
    pub fn success_rate(&self) -> Option<f64> {
        self.failure_fraction.map(|f| 1.0 - f)
    }

    fn contains(&self, step: u64) -> bool {
        self.after.is_none_or(|lo| step > lo) && self.up_to.is_none_or(|hi| step <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstRewardHistogram {
    pub bins: Vec<FirstRewardBin>,
    /// Runs that never stored a rewarded transition.
    pub never_rewarded: usize,
    pub never_rewarded_failures: usize,
}

impl FirstRewardHistogram {
    /// Success rate of the first and last non-empty bins.
    pub fn first_and_last_success(&self) -> Option<(f64, f64)> {
        let mut rates = self.bins.iter().filter_map(|b| b.success_rate());
        let first = rates.next()?;
        Some((first, rates.next_back().unwrap_or(first)))
    }
}

/// Bins runs by first-reward step using increasing inclusive upper `edges`.
/// Diverged runs are counted in their bin but not as failures.
pub fn first_reward_failure_correlation(runs: &[RunMetrics], edges: &[u64]) -> FirstRewardHistogram {
    let mut bins: Vec<FirstRewardBin> = (0..=edges.len())
        .map(|i| FirstRewardBin {
            after: i.checked_sub(1).map(|j| edges[j]),
            up_to: edges.get(i).copied(),
            count: 0,
            failures: 0,
            failure_fraction: None,
        })
        .collect();
    let mut never_rewarded = 0;
    let mut never_rewarded_failures = 0;
    for run in runs {
        match run.first_reward_step {
            None => {
                never_rewarded += 1;
                never_rewarded_failures += run.failed() as usize;
            }
            Some(step) => {
                let bin = bins.iter_mut().find(|b| b.contains(step)).expect("bins cover all steps");
                bin.count += 1;
                bin.failures += run.failed() as usize;
            }
        }
    }
    for bin in &mut bins {
        if bin.count > 0 {
            bin.failure_fraction = Some(bin.failures as f64 / bin.count as f64);
        }
    }
    FirstRewardHistogram {
        bins,
        never_rewarded,
        never_rewarded_failures,
    }
}

/// Shape summary of a critic snapshot: the spread of Q where `s + a >= 0.05`
/// and the largest Q where `s + a < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotShape {
    pub unrewarded_range: f64,
    pub rewarded_max: f64,
}

pub fn snapshot_shape(snap: &CriticSnapshot) -> SnapshotShape {
    let (mut lo, mut hi, mut rewarded_max) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, &s) in snap.states.iter().enumerate() {
        for (j, &a) in snap.actions.iter().enumerate() {
            let q = snap.q_at(i, j);
            if s + a >= 0.05 {
                lo = lo.min(q);
                hi = hi.max(q);
            } else if s + a < 0.0 {
                rewarded_max = rewarded_max.max(q);
            }
        }
    }
    SnapshotShape {
        unrewarded_range: hi - lo,
        rewarded_max,
    }
}

/// Distinct values in a snapshot's Q table, sorted.
pub fn distinct_q_values(snap: &CriticSnapshot) -> Vec<f64> {
    let mut v = snap.q.clone();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
