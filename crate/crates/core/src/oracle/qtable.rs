//! Exact state-action values of deterministic policies on a uniform grid.
//!
//! Grid points are mapped onto an integer lattice fine enough to hold every
//! grid state and grid action, so rollouts driven by lattice-valued actions
//! use integer arithmetic and `s + a < 0` is decided exactly. A policy that
//! returns an off-lattice action switches that rollout to `f64` dynamics.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::{self, EnvKind};
use crate::error::{Error, Result};

/// Values below this are treated as zero when choosing the horizon.
pub const TRUNCATION: f64 = 1e-12;

/// `n_states` points on `[0, 1]`, `n_actions` points on `[-0.1, 0.1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_states: usize,
    pub n_actions: usize,
}

impl GridSpec {
    pub const DEFAULT: GridSpec = GridSpec { n_states: 101, n_actions: 41 };
    /// State step equals action step (0.005), so `s + a` of grid points is a grid state.
    pub const ALIGNED: GridSpec = GridSpec { n_states: 201, n_actions: 41 };

    pub fn new(n_states: usize, n_actions: usize) -> Result<Self> {
        if n_states < 2 || n_actions < 2 {
            return Err(Error::Config(format!("grid needs at least 2x2 points, got {n_states}x{n_actions}")));
        }
        Ok(Self { n_states, n_actions })
    }

    pub fn state(&self, i: usize) -> f64 {
        i as f64 / (self.n_states - 1) as f64
    }

    pub fn action(&self, j: usize) -> f64 {
        let m = (self.n_actions - 1) as i64;
        (2 * j as i64 - m) as f64 / (10 * m) as f64
    }

    pub fn states(&self) -> Vec<f64> {
        (0..self.n_states).map(|i| self.state(i)).collect()
    }

    pub fn actions(&self) -> Vec<f64> {
        (0..self.n_actions).map(|j| self.action(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn lattice(&self) -> Lattice {
        let ds = (self.n_states - 1) as i64;
        let da = 10 * (self.n_actions - 1) as i64;
        let denom = ds / gcd(ds, da) * da;
        Lattice {
            denom,
            state_unit: denom / ds,
            action_unit: denom / da,
            half_actions: (self.n_actions - 1) as i64,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::DEFAULT
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Integer coordinates: a value `x` is stored as `x * denom`.
#[derive(Debug, Clone, Copy)]
struct Lattice {
    denom: i64,
    state_unit: i64,
    action_unit: i64,
    half_actions: i64,
}

impl Lattice {
    fn state(&self, i: usize) -> i64 {
        i as i64 * self.state_unit
    }

    fn action(&self, j: usize) -> i64 {
        (2 * j as i64 - self.half_actions) * self.action_unit
    }

    fn to_f64(self, units: i64) -> f64 {
        units as f64 / self.denom as f64
    }

    /// Lattice units of `x` if it lies on the lattice.
    fn units_of(&self, x: f64) -> Option<i64> {
        let scaled = x * self.denom as f64;
        let rounded = scaled.round();
        ((scaled - rounded).abs() <= 1e-9 * rounded.abs().max(1.0)).then_some(rounded as i64)
    }
}

#[derive(Debug, Clone, Copy)]
enum Point {
    Exact(i64),
    Float(f64),
}

/// Rewarded step index of the rollout from `(s, a)` followed by `policy`, or
/// `None` if no reward arrives within `horizon` steps.
fn rollout(lat: &Lattice, s: i64, a: i64, policy: &dyn Fn(f64) -> f64, horizon: u32) -> Option<u32> {
    let mut state = Point::Exact(s);
    let mut action = Point::Exact(a);
    for n in 0..=horizon {
        let next = match (state, action) {
            (Point::Exact(s), Point::Exact(a)) => {
                if s + a < 0 {
                    return Some(n);
                }
                Point::Exact((s + a).min(lat.denom))
            }
            (s, a) => {
                let s = match s {
                    Point::Exact(u) => lat.to_f64(u),
                    Point::Float(x) => x,
                };
                let a = match a {
                    Point::Exact(u) => lat.to_f64(u),
                    Point::Float(x) => x,
                };
                let t = env::step_unchecked(EnvKind::OneDToy, s, a);
                if t.terminal {
                    return Some(n);
                }
                Point::Float(t.s_next)
            }
        };
        let s_next = match next {
            Point::Exact(u) => lat.to_f64(u),
            Point::Float(x) => x,
        };
        let a_next = policy(s_next);
        let a_next = match (next, lat.units_of(a_next)) {
            (Point::Exact(_), Some(u)) => Point::Exact(u),
            _ => Point::Float(a_next),
        };
        // A deterministic policy revisiting the same state repeats forever.
        let fixed = match (state, next) {
            (Point::Exact(x), Point::Exact(y)) => x == y,
            (Point::Float(x), Point::Float(y)) => x == y,
            _ => false,
        };
        if fixed && n > 0 {
            return None;
        }
        state = next;
        action = a_next;
    }
    None
}

/// Smallest `H` with `gamma^H < TRUNCATION`.
pub fn horizon_for(gamma: f64) -> u32 {
    (TRUNCATION.ln() / gamma.ln()).ceil() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub grid: GridSpec,
    pub gamma: f64,
    pub horizon: u32,
    /// Row-major, states outer.
    pub values: Vec<f64>,
    /// Index of the rewarded step along the rollout; `None` if never rewarded.
    pub steps: Vec<Option<u32>>,
}

impl QTable {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_actions + j]
    }

    pub fn steps_at(&self, i: usize, j: usize) -> Option<u32> {
        self.steps[i * self.grid.n_actions + j]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "a", "q", "n_steps"])?;
        for i in 0..self.grid.n_states {
            for j in 0..self.grid.n_actions {
                let n = self.steps_at(i, j).map_or_else(|| "inf".to_string(), |n| n.to_string());
                w.write_record([
                    self.grid.state(i).to_string(),
                    self.grid.action(j).to_string(),
                    self.get(i, j).to_string(),
                    n,
                ])
                ?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for QTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "QTable {}x{} gamma={} horizon={}",
            self.grid.n_states, self.grid.n_actions, self.gamma, self.horizon
        )
    }
}

/// `Q(s, a) = gamma^N` where `N` is the index of the rewarded step of the
/// rollout that takes `a` in `s` and then follows `policy`; 0 when no reward
/// arrives within the horizon.
pub fn compute_qpi(policy: &dyn Fn(f64) -> f64, grid: GridSpec, gamma: f64) -> Result<QTable> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let lat = grid.lattice();
    let horizon = horizon_for(gamma);
    let mut values = Vec::with_capacity(grid.len());
    let mut steps = Vec::with_capacity(grid.len());
    for i in 0..grid.n_states {
        for j in 0..grid.n_actions {
            let n = rollout(&lat, lat.state(i), lat.action(j), policy, horizon);
            values.push(n.map_or(0.0, |n| gamma.powi(n as i32)));
            steps.push(n);
        }
    }
    Ok(QTable {
        grid,
        gamma,
        horizon,
        values,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellmanReport {
    pub max_residual: f64,
    /// Largest distance from a successor state to its nearest grid state.
    pub max_state_snap: f64,
    /// Largest distance from `policy(s')` to its nearest grid action.
    pub max_action_snap: f64,
}

/// `max |Q(s,a) - r - gamma (1 - t) Q(s', policy(s'))|` over the grid, with
/// `s'` and `policy(s')` snapped to the nearest grid points.
pub fn bellman_residual(table: &QTable, policy: &dyn Fn(f64) -> f64) -> BellmanReport {
    let grid = table.grid;
    let lat = grid.lattice();
    let mut report = BellmanReport {
        max_residual: 0.0,
        max_state_snap: 0.0,
        max_action_snap: 0.0,
    };
    let state_step = 1.0 / (grid.n_states - 1) as f64;
    let action_step = 0.2 / (grid.n_actions - 1) as f64;
    for i in 0..grid.n_states {
        for j in 0..grid.n_actions {
            let sum = lat.state(i) + lat.action(j);
            let target = if sum < 0 {
                1.0
            } else {
                let next = sum.min(lat.denom);
                let i_next = ((next as f64 / lat.state_unit as f64).round() as usize).min(grid.n_states - 1);
                report.max_state_snap = report
                    .max_state_snap
                    .max(lat.to_f64((next - lat.state(i_next)).abs()));
                let a_next = policy(grid.state(i_next));
                let j_next = (((a_next + env::ACTION_LIMIT) / action_step).round().max(0.0) as usize)
                    .min(grid.n_actions - 1);
                report.max_action_snap = report.max_action_snap.max((a_next - grid.action(j_next)).abs());
                table.gamma * table.get(i_next, j_next)
            };
            report.max_residual = report.max_residual.max((table.get(i, j) - target).abs());
        }
    }
    // Snap distances are reported in absolute units, never above half a step.
    debug_assert!(report.max_state_snap <= state_step / 2.0 + 1e-15);
    report
}
