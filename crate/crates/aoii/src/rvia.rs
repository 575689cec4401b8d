//! Relative value iteration on a truncated state space: an independent
//! dynamic-programming oracle for the closed-form results.
//!
//! The average-cost Bellman operator for the per-slot cost
//! `f(S) + lambda * psi` is
//!
//! ```text
//! T(V)(0) = f(0) + alpha V(0) + (1-alpha) V(1)
//! T(V)(S) = f(S) + min{ beta V(S+) + (1-beta) V(0),
//!                       lambda + a V(S+) + (1-a) V(0) },   S >= 1
//! ```
//!
//! with `S+ = min(S+1, K)`: the truncation boundary self-loops on the growth
//! branch, exactly like the lumped top state of a saturating penalty, so far
//! from the boundary the iterates converge to the untruncated differential
//! cost-to-go. Iterates are re-anchored at the reference state each sweep,
//! `V_{t+1} = T(V_t) - T(V_t)(0)`, and the anchor value converges to the
//! optimal average cost.
//!
//! Sweeps are synchronous with a deterministic order and a fixed tolerance,
//! so oracle runs are bit-reproducible.
//!
//! Nothing here touches the closed-form module: the oracle exists to check
//! it from the outside.

use crate::model::{Action, PenaltySpec, SourceChannelParams, State, Threshold};
use crate::{Error, Result};

/// Truncation, tolerance and sweep budget of one oracle run.
#[derive(Debug, Clone, Copy)]
pub struct RviaOptions {
    /// Number of non-zero states; state space is `0..=k`. For bounded
    /// penalties the natural choice (and the forced value) is `s_thresh`.
    pub k: u64,
    /// Sup-norm convergence tolerance on the value iterates.
    pub tol: f64,
    /// Sweep budget.
    pub max_iter: u64,
}

impl Default for RviaOptions {
    fn default() -> Self {
        Self {
            k: 200,
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

/// Converged oracle output.
#[derive(Debug, Clone)]
pub struct RviaResult {
    /// Differential cost-to-go over `0..=k`, anchored at `V(0) = 0`.
    pub v: Vec<f64>,
    /// Average-cost estimate `T(V)(0)` at convergence.
    pub theta_est: f64,
    /// Greedy action per state on the converged values. State 0 is
    /// action-indifferent and reported `Idle`.
    pub greedy: Vec<Action>,
    /// Sweeps performed.
    pub iterations: u64,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    lambda: f64,
    activity_bound: f64,
}

impl RviaResult {
    /// Threshold extracted from the converged values with the same
    /// convention as the closed-form search: the first state whose
    /// continuation value justifies paying `lambda`, i.e.
    /// `inf{S >= 0 : lambda + (a - beta) V(S+) < 0}` (equivalently
    /// `V(S+) > lambda/(beta-a)`), minus nothing — `S = 0` maps to `Always`.
    /// Returns `Never` when no state qualifies, which for an unbounded
    /// penalty means the threshold lies beyond the truncation.
    pub fn threshold_estimate(&self) -> Threshold {
        let k = self.v.len() - 1;
        for s in 0..=k {
            let up = self.v[(s + 1).min(k)];
            if up > self.activity_bound {
                return Threshold::from_index(s as u64);
            }
        }
        Threshold::Never
    }

    /// First non-zero state whose greedy action is `Transmit`, if any.
    pub fn greedy_switch(&self) -> Option<State> {
        (1..self.v.len()).find(|&s| self.greedy[s] == Action::Transmit).map(|s| s as u64)
    }

    /// Multiplier the run was solved for.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Runs relative value iteration for multiplier `lambda`.
///
/// For bounded penalties the state space is forced to `0..=s_thresh`
/// regardless of `opts.k`.
pub fn rvia(
    lambda: f64,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    opts: &RviaOptions,
) -> Result<RviaResult> {
    let k = match f.s_thresh() {
        Some(s) => s,
        None => opts.k.max(1),
    } as usize;
    let alpha = params.alpha();
    let beta = params.beta();
    let a = params.a();

    let cost: Vec<f64> = (0..=k as u64).map(|s| f.eval(s)).collect();
    let mut v = vec![0.0; k + 1];
    let mut next = vec![0.0; k + 1];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let anchor = cost[0] + alpha * v[0] + (1.0 - alpha) * v[1];
        next[0] = 0.0;
        let mut worst = 0.0f64;
        for s in 1..=k {
            let up = v[(s + 1).min(k)];
            let idle = beta * up + (1.0 - beta) * v[0];
            let transmit = lambda + a * up + (1.0 - a) * v[0];
            let t = cost[s] + idle.min(transmit);
            let new = t - anchor;
            let change = (new - v[s]).abs();
            if change > worst {
                worst = change;
            }
            next[s] = new;
        }
        std::mem::swap(&mut v, &mut next);
        residual = worst;
        iterations += 1;
        if residual <= opts.tol {
            break;
        }
    }
    if residual > opts.tol {
        return Err(Error::NoConvergence {
            max_iter: opts.max_iter,
            residual,
        });
    }
    // One more operator application gives the converged average cost.
    let theta_est = cost[0] + alpha * v[0] + (1.0 - alpha) * v[1];

    let activity_bound = lambda / (beta - a);
    let greedy = (0..=k)
        .map(|s| {
            if s == 0 {
                return Action::Idle;
            }
            let up = v[(s + 1).min(k)];
            if lambda + (a - beta) * up < 0.0 {
                Action::Transmit
            } else {
                Action::Idle
            }
        })
        .collect();

    Ok(RviaResult {
        v,
        theta_est,
        greedy,
        iterations,
        residual,
        lambda,
        activity_bound,
    })
}

/// Whether the converged values are non-decreasing in the state (up to a
/// 1e-9 slack for iteration noise).
pub fn check_monotone(result: &RviaResult) -> bool {
    result.v.windows(2).all(|w| w[1] >= w[0] - 1e-9)
}

/// Whether the greedy actions over non-zero states form an idle block
/// followed by a transmit block (either block may be empty).
pub fn check_threshold_structure(result: &RviaResult) -> bool {
    let mut seen_transmit = false;
    for s in 1..result.greedy.len() {
        match result.greedy[s] {
            Action::Transmit => seen_transmit = true,
            Action::Idle if seen_transmit => return false,
            Action::Idle => {}
        }
    }
    true
}
