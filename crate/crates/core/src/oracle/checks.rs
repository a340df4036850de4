use serde::{Deserialize, Serialize};

use crate::env::{self, EnvKind, ACTION_LIMIT};
use crate::oracle::qtable::{GridSpec, QTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseReport {
    /// Distinct table values, ascending.
    pub distinct_values: Vec<f64>,
    /// Largest distance from a table value to the nearest member of
    /// `{0} ∪ {gamma^n r : 0 <= n <= horizon, r in rewards}`.
    pub max_membership_error: f64,
    pub members: bool,
    /// Fraction of cells whose in-grid 4-neighbour differences are all zero.
    pub flat_fraction: f64,
}

pub fn check_piecewise_values(table: &QTable, rewards: &[f64], tol: f64) -> PiecewiseReport {
    let mut allowed = vec![0.0];
    for &r in rewards {
        allowed.extend((0..=table.horizon).map(|n| r * table.gamma.powi(n as i32)));
    }
    let max_membership_error = table
        .values
        .iter()
        .map(|&q| allowed.iter().map(|m| (q - m).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);

    let mut distinct_values = table.values.clone();
    distinct_values.sort_by(f64::total_cmp);
    distinct_values.dedup();

    let (ns, na) = (table.grid.n_states, table.grid.n_actions);
    let mut flat = 0usize;
    for i in 0..ns {
        for j in 0..na {
            let q = table.get(i, j);
            let neighbours = [
                (i.checked_sub(1), Some(j)),
                ((i + 1 < ns).then_some(i + 1), Some(j)),
                (Some(i), j.checked_sub(1)),
                (Some(i), (j + 1 < na).then_some(j + 1)),
            ];
            if neighbours
                .iter()
                .filter_map(|&(a, b)| Some(table.get(a?, b?)))
                .all(|v| v == q)
            {
                flat += 1;
            }
        }
    }
    PiecewiseReport {
        distinct_values,
        max_membership_error,
        members: max_membership_error <= tol,
        flat_fraction: flat as f64 / table.values.len() as f64,
    }
}

/// Critic that pays 1 exactly when the next step is rewarded.
pub fn indicator_critic(s: f64, a: f64) -> f64 {
    if s + a < 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadlockReport {
    pub cells: usize,
    /// Cells where the TD target differs from the indicator critic when the
    /// policy always moves right.
    pub critic_violations: usize,
    /// States where the action difference quotient at `a = 0.1` is nonzero.
    pub nonzero_quotients: usize,
    /// Same as `critic_violations`, but for the always-left control policy.
    pub control_violations: usize,
}

impl DeadlockReport {
    pub fn holds(&self) -> bool {
        self.critic_violations == 0 && self.nonzero_quotients == 0 && self.control_violations > 0
    }
}

/// Number of grid cells whose TD target `r + gamma (1 - t) Q(s', policy(s'))`
/// differs from `Q(s, a)`, for the indicator critic.
fn td_violations(grid: GridSpec, gamma: f64, policy: impl Fn(f64) -> f64) -> usize {
    let mut violations = 0;
    for s in grid.states() {
        for a in grid.actions() {
            let t = env::step_unchecked(EnvKind::OneDToy, s, a);
            let next = if t.terminal {
                0.0
            } else {
                indicator_critic(t.s_next, policy(t.s_next))
            };
            let y = t.r + gamma * next;
            if y != indicator_critic(s, a) {
                violations += 1;
            }
        }
    }
    violations
}

/// Evaluates the always-right policy paired with the indicator critic: the TD
/// target reproduces the critic on every cell, and the critic is flat in the
/// action around `a = 0.1`, so neither update moves.
pub fn check_deadlock_fixed_point(grid: GridSpec, gamma: f64, h: f64) -> DeadlockReport {
    let nonzero_quotients = grid
        .states()
        .into_iter()
        .filter(|&s| {
            let dq = (indicator_critic(s, ACTION_LIMIT + h) - indicator_critic(s, ACTION_LIMIT - h)) / (2.0 * h);
            dq != 0.0
        })
        .count();
    DeadlockReport {
        cells: grid.len(),
        critic_violations: td_violations(grid, gamma, |_| ACTION_LIMIT),
        nonzero_quotients,
        control_violations: td_violations(grid, gamma, |_| -ACTION_LIMIT),
    }
}

/// Constant `nu` in the value-gap construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapConstant {
    /// `gamma^2 / (1 - gamma)`.
    OverOneMinusGamma,
    /// `gamma^2 (1 - gamma)`, the constant the construction actually supports.
    TimesOneMinusGamma,
}

impl GapConstant {
    pub fn value(self, gamma: f64) -> f64 {
        match self {
            GapConstant::OverOneMinusGamma => gamma * gamma / (1.0 - gamma),
            GapConstant::TimesOneMinusGamma => gamma * gamma * (1.0 - gamma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueGapRow {
    pub gamma: f64,
    pub delta: f64,
    pub nu: f64,
    pub n: u32,
    /// `gamma^n`.
    pub upper: f64,
    /// `gamma^(n+1)`.
    pub lower: f64,
    /// `delta * nu < upper - lower`.
    pub gap_holds: bool,
    /// `lower < upper < delta`.
    pub order_holds: bool,
}

impl ValueGapRow {
    pub fn holds(&self) -> bool {
        self.gap_holds && self.order_holds
    }
}

/// `n = floor(log_gamma delta) + 1`, i.e. the smallest `n` with `gamma^n < delta`.
pub fn gap_exponent(gamma: f64, delta: f64) -> u32 {
    let mut n = ((delta.ln() / gamma.ln()).floor() + 1.0).max(1.0) as u32;
    // Correct for rounding in the logarithm ratio.
    while gamma.powi(n as i32) >= delta {
        n += 1;
    }
    while n > 1 && gamma.powi(n as i32 - 1) < delta {
        n -= 1;
    }
    n
}

/// Single-reward (`r = 1`) value-gap construction for each `delta` in `(0, 1)`.
pub fn check_value_gap(gamma: f64, deltas: &[f64], constant: GapConstant) -> Vec<ValueGapRow> {
    let nu = constant.value(gamma);
    deltas
        .iter()
        .map(|&delta| {
            let n = gap_exponent(gamma, delta);
            let upper = gamma.powi(n as i32);
            let lower = gamma.powi(n as i32 + 1);
            ValueGapRow {
                gamma,
                delta,
                nu,
                n,
                upper,
                lower,
                gap_holds: delta * nu < upper - lower,
                order_holds: lower < upper && upper < delta,
            }
        })
        .collect()
}

/// `count` log-spaced points strictly inside `(lo, hi)`.
pub fn log_spaced_open(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (1..=count)
        .map(|k| (a + (b - a) * k as f64 / (count + 1) as f64).exp())
        .collect()
}
