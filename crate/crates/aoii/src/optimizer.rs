//! Constrained optimization of the transmission policy.
//!
//! For a fixed Lagrange multiplier `lambda` the optimal policy is a pure
//! threshold, found by doubling an interval from `[1, 2]` and binary-searching
//! the first sign change of the activity margin `H(n)` (which is
//! non-decreasing in `n`). The multiplier itself is found by bisection: the
//! update rate of the `lambda`-optimal policy is non-increasing in `lambda`
//! and equals 1 at `lambda = 0`, so doubling from `[0, 1]` brackets the rate
//! budget and bisection pins `lambda* = inf{lambda : C <= delta}`.
//!
//! At `lambda*` two adjacent thresholds straddle the budget; randomizing
//! between them with weight `mu* = (delta - C_high)/(C_low - C_high)` meets
//! the budget with equality. Analytic performance uses exactly that convex
//! combination. For execution on a single sample path the same mixture is
//! realized by transmitting with probability `q` in the single state where
//! the two thresholds disagree, with `q` chosen so the stationary update rate
//! of the modified chain equals `delta`.
//!
//! Shortcuts skip the search entirely: `delta = 1` allows transmitting every
//! slot, and a saturating penalty with `delta >= vartheta` is served by the
//! pure "transmit whenever S != 0" policy with the constraint slack.

use crate::closed_form::{
    average_error, average_penalty, geom_sum, h_margin, tail_sum, update_rate, DEFAULT_EPS_TAIL,
};
use crate::model::{PenaltyKind, PenaltySpec, SourceChannelParams, Threshold};
use crate::sim::Policy;
use crate::{Error, Result};

/// Tunable tolerances of the solver.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Absolute bisection tolerance on the Lagrange multiplier.
    pub eps_lambda: f64,
    /// Per-term precision of infinite tail sums.
    pub eps_tail: f64,
    /// Hard cap for the threshold-search interval doubling.
    pub doubling_cap: u64,
    /// Maximum multiplier doublings before giving up on bracketing.
    pub lambda_doubling_cap: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps_lambda: 1e-6,
            eps_tail: DEFAULT_EPS_TAIL,
            doubling_cap: 1 << 30,
            lambda_doubling_cap: 200,
        }
    }
}

/// Rate gap below which the mixture collapses to the feasible pure policy,
/// avoiding a 0/0 in the weight.
const DEGENERATE_RATE_GAP: f64 = 1e-12;

/// Optimal pure threshold for a fixed multiplier:
/// `inf{n >= 1 : H(n) > 0} - 1`, with `Always` standing for 0.
///
/// For saturating penalties the search space is capped at `s_thresh`, and a
/// non-positive margin at the cap means transmitting never pays:
/// the policy is `Never`. (That test is the limit-safe form of the
/// multiplier bound `(beta-a)(f(S_thresh)-theta_{S_thresh})/(1-beta)`, which
/// is undefined at `beta = 1`.)
pub fn find_threshold(
    lambda: f64,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    opts: &SolverOptions,
) -> Result<Threshold> {
    let h = |n: u64| h_margin(n, lambda, params, f, opts.eps_tail);

    let cap = match f.kind() {
        PenaltyKind::Bounded { s_thresh, .. } => {
            if h(s_thresh)? <= 0.0 {
                return Ok(Threshold::Never);
            }
            s_thresh
        }
        PenaltyKind::Unbounded => opts.doubling_cap,
    };

    // Interval doubling from [1, 1] until the margin turns positive.
    let mut lo = 1u64;
    let mut hi = 1u64;
    while h(hi)? <= 0.0 {
        lo = hi;
        if hi >= cap {
            return Err(Error::SearchOverflow { cap });
        }
        hi = (hi * 2).min(cap);
    }
    // Invariant: H(lo) <= 0 < H(hi) (or lo == hi == 1 with H(1) > 0).
    let mut probe = lo + (hi - lo).div_ceil(2);
    while probe < hi {
        if h(probe)? <= 0.0 {
            lo = probe;
        } else {
            hi = probe;
        }
        probe = lo + (hi - lo).div_ceil(2);
    }
    Ok(Threshold::from_index(probe - 1))
}

/// Randomized two-threshold policy meeting the rate budget with equality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixturePolicy {
    /// Lower threshold (higher rate), `n_high`'s predecessor.
    pub n_low: Threshold,
    /// Higher threshold (lower rate); the state where the two disagree is
    /// `n_high - 1`.
    pub n_high: Threshold,
    /// Weight on `n_low` in the convex combination.
    pub mu: f64,
    /// Per-slot transmit probability at the disagreement state that realizes
    /// the budget rate on a single stationary chain.
    pub q_boundary: f64,
    /// Update rate of the pure `n_low` policy.
    pub c_low: f64,
    /// Update rate of the pure `n_high` policy.
    pub c_high: f64,
}

impl MixturePolicy {
    /// Degenerate mixture standing for a single pure threshold.
    pub fn pure(n: Threshold, params: &SourceChannelParams) -> Self {
        let c = update_rate(n, params);
        Self {
            n_low: n,
            n_high: n,
            mu: 0.0,
            q_boundary: 0.0,
            c_low: c,
            c_high: c,
        }
    }

    /// Whether both components coincide.
    pub fn is_pure(&self) -> bool {
        self.n_low == self.n_high
    }

    /// Long-run update rate of the mixture, `mu C_low + (1-mu) C_high`.
    pub fn rate(&self) -> f64 {
        self.mu * self.c_low + (1.0 - self.mu) * self.c_high
    }

    /// Executable single-chain form of the mixture.
    ///
    /// When `n_high` is `Never` the disagreement "state" is the whole
    /// saturated region `S >= s_thresh` of the penalty's truncated model.
    pub fn to_sim_policy(&self, f: &PenaltySpec) -> Policy {
        if self.is_pure() {
            return Policy::Threshold(self.n_high);
        }
        match self.n_high {
            Threshold::At(n) => Policy::BoundaryRandomized {
                boundary: n - 1,
                q: self.q_boundary,
                lumped: false,
            },
            Threshold::Never => Policy::BoundaryRandomized {
                boundary: f
                    .s_thresh()
                    .expect("Never threshold only exists for bounded penalties"),
                q: self.q_boundary,
                lumped: true,
            },
            Threshold::Always => Policy::Threshold(Threshold::Always),
        }
    }
}

/// Solution of the rate-constrained problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeSolution {
    /// Smallest multiplier whose optimal policy meets the budget (0 for the
    /// shortcut policies).
    pub lambda_star: f64,
    /// The optimal (possibly degenerate) two-threshold mixture.
    pub policy: MixturePolicy,
    /// Long-run average penalty of the mixture under the optimized `f`.
    pub avg_aoii: f64,
    /// Long-run mismatch probability of the mixture.
    pub avg_error: f64,
    /// Long-run update rate of the mixture; equals `delta` when the
    /// constraint binds.
    pub achieved_rate: f64,
}

impl LagrangeSolution {
    /// Threshold index for reports: the higher mixture component, except that
    /// a `Never` component defers to the active lower threshold.
    pub fn reported_threshold(&self, f: &PenaltySpec) -> u64 {
        match self.policy.n_high {
            Threshold::Never => self.policy.n_low.index(f),
            other => other.index(f),
        }
    }
}

/// Solves the rate-constrained average-penalty problem for `params.delta()`.
pub fn solve(
    params: &SourceChannelParams,
    f: &PenaltySpec,
    opts: &SolverOptions,
) -> Result<LagrangeSolution> {
    let delta = params.delta();

    // Non-binding shortcuts.
    if f.is_bounded() && delta >= params.vartheta() {
        // Transmit whenever S != 0; the budget has slack.
        return assemble(0.0, MixturePolicy::pure(Threshold::At(1), params), params, f, opts);
    }
    if delta >= 1.0 {
        return assemble(0.0, MixturePolicy::pure(Threshold::Always, params), params, f, opts);
    }

    let rate_at = |lambda: f64| -> Result<(Threshold, f64)> {
        let n = find_threshold(lambda, params, f, opts)?;
        Ok((n, update_rate(n, params)))
    };

    // Double the multiplier until the optimal policy is feasible.
    let mut lambda_lo = 0.0f64;
    let mut lambda_hi = 1.0f64;
    let mut doublings = 0u32;
    let (mut n_hi, mut c_hi) = rate_at(lambda_hi)?;
    while c_hi > delta {
        lambda_lo = lambda_hi;
        lambda_hi *= 2.0;
        doublings += 1;
        if doublings > opts.lambda_doubling_cap {
            return Err(Error::InfeasibleTolerance { delta });
        }
        let r = rate_at(lambda_hi)?;
        n_hi = r.0;
        c_hi = r.1;
    }

    // Bisection on the multiplier.
    let mut mid = 0.5 * (lambda_lo + lambda_hi);
    while (lambda_hi - mid).abs() > opts.eps_lambda {
        let (n_mid, c_mid) = rate_at(mid)?;
        if c_mid > delta {
            lambda_lo = mid;
        } else {
            lambda_hi = mid;
            n_hi = n_mid;
            c_hi = c_mid;
        }
        mid = 0.5 * (lambda_lo + lambda_hi);
    }
    let lambda_star = lambda_hi;
    debug_assert!(c_hi <= delta);

    // The infeasible side of the final bracket.
    let (n_lo_thr, c_lo_thr) = rate_at(lambda_lo)?;
    debug_assert!(c_lo_thr > delta || lambda_lo == 0.0);
    let _ = c_lo_thr;

    // Walk the threshold family from the infeasible side to the first
    // feasible member; its predecessor closes the bracket. The walk matters
    // only when the threshold jumps by more than one across lambda*, in
    // which case every skipped threshold is equally optimal there.
    let mut n_high = n_lo_thr.successor(f);
    loop {
        if update_rate(n_high, params) <= delta {
            break;
        }
        if n_high == n_hi {
            break;
        }
        n_high = n_high.successor(f);
    }
    let n_low = n_high.predecessor(f);
    let c_high = update_rate(n_high, params);
    let c_low = update_rate(n_low, params);

    let policy = if c_low - c_high < DEGENERATE_RATE_GAP {
        MixturePolicy::pure(n_high, params)
    } else {
        let mu = (delta - c_high) / (c_low - c_high);
        let q = solve_boundary_probability(n_high, delta, params, f);
        MixturePolicy {
            n_low,
            n_high,
            mu,
            q_boundary: q,
            c_low,
            c_high,
        }
    };
    assemble(lambda_star, policy, params, f, opts)
}

fn assemble(
    lambda_star: f64,
    policy: MixturePolicy,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    opts: &SolverOptions,
) -> Result<LagrangeSolution> {
    let pen_low = average_penalty(policy.n_low, params, f, opts.eps_tail)?;
    let pen_high = if policy.is_pure() {
        pen_low
    } else {
        average_penalty(policy.n_high, params, f, opts.eps_tail)?
    };
    let err_low = average_error(policy.n_low, params);
    let err_high = average_error(policy.n_high, params);
    let mu = policy.mu;
    Ok(LagrangeSolution {
        lambda_star,
        policy,
        avg_aoii: mu * pen_low + (1.0 - mu) * pen_high,
        avg_error: mu * err_low + (1.0 - mu) * err_high,
        achieved_rate: policy.rate(),
    })
}

/// Error-optimal policy: the solution for the indicator penalty
/// (`f(0) = 0`, `f(S >= 1) = 1`, saturated at `S_thresh = 1`).
pub fn error_optimal(
    params: &SourceChannelParams,
    opts: &SolverOptions,
) -> Result<LagrangeSolution> {
    solve(params, &crate::apps::error_f(), opts)
}

/// Stationary update rate of the boundary-randomized realization of the
/// mixture with upper threshold `n_high` and transmit probability `q` at the
/// disagreement state. Strictly increasing in `q`, spanning
/// `[C(n_high), C(n_high - 1)]`.
pub fn boundary_randomized_rate(
    n_high: Threshold,
    q: f64,
    params: &SourceChannelParams,
    f: &PenaltySpec,
) -> f64 {
    let alpha = params.alpha();
    let beta = params.beta();
    let a = params.a();
    let b = q * a + (1.0 - q) * beta;
    match n_high {
        Threshold::Always => 1.0,
        Threshold::At(1) => {
            // Randomizing at S = 0 does not move the chain; it only spends
            // budget. The chain is the threshold-1 chain.
            let z = 1.0 + (1.0 - alpha) / (1.0 - a);
            (q + (1.0 - alpha) / (1.0 - a)) / z
        }
        Threshold::At(n) => {
            let beta_pow = beta.powf((n - 2) as f64);
            let z = 1.0
                + (1.0 - alpha) * geom_sum(beta, n - 1)
                + (1.0 - alpha) * beta_pow * b / (1.0 - a);
            (1.0 - alpha) * beta_pow * (q + b / (1.0 - a)) / z
        }
        Threshold::Never => {
            // Transmit with probability q anywhere in the saturated region.
            let s_b = f
                .s_thresh()
                .expect("Never threshold only exists for bounded penalties");
            if q == 0.0 {
                return 0.0;
            }
            let beta_pow = beta.powf((s_b - 1) as f64);
            let top = (1.0 - alpha) * beta_pow / (1.0 - b);
            let z = 1.0 + (1.0 - alpha) * geom_sum(beta, s_b - 1) + top;
            q * top / z
        }
    }
}

/// Long-run average of an arbitrary scoring penalty under the
/// boundary-randomized policy (upper threshold `n_high`, transmit probability
/// `q` at the disagreement state of the `f_model` chain).
///
/// This is the stationary value of the executable single-chain realization,
/// which for scoring functions other than the optimized one differs from the
/// convex combination of the two pure-policy averages.
pub fn boundary_policy_average(
    n_high: Threshold,
    q: f64,
    params: &SourceChannelParams,
    f_model: &PenaltySpec,
    f_score: &PenaltySpec,
    eps_tail: f64,
) -> Result<f64> {
    let alpha = params.alpha();
    let beta = params.beta();
    let a = params.a();
    let b = q * a + (1.0 - q) * beta;
    match n_high {
        Threshold::Always | Threshold::At(1) => {
            average_penalty(Threshold::At(1), params, f_score, eps_tail)
        }
        Threshold::At(n) => {
            let beta_pow = beta.powf((n - 2) as f64);
            let z = 1.0
                + (1.0 - alpha) * geom_sum(beta, n - 1)
                + (1.0 - alpha) * beta_pow * b / (1.0 - a);
            let mut below = 0.0;
            let mut pow = 1.0;
            for k in 1..n {
                below += f_score.eval(k) * pow;
                pow *= beta;
            }
            let upper = b * tail_sum(f_score, a, n, eps_tail)?;
            Ok((f_score.eval(0) + (1.0 - alpha) * (below + beta_pow * upper)) / z)
        }
        Threshold::Never => {
            let s_b = f_model
                .s_thresh()
                .expect("Never threshold only exists for bounded penalties");
            if b >= 1.0 {
                return Err(Error::AbsorbingChain);
            }
            let beta_pow = beta.powf((s_b - 1) as f64);
            let z = 1.0
                + (1.0 - alpha) * geom_sum(beta, s_b - 1)
                + (1.0 - alpha) * beta_pow / (1.0 - b);
            let mut below = 0.0;
            let mut pow = 1.0;
            for k in 1..s_b {
                below += f_score.eval(k) * pow;
                pow *= beta;
            }
            let from_boundary = tail_sum(f_score, b, s_b, eps_tail)?;
            Ok((f_score.eval(0) + (1.0 - alpha) * (below + beta_pow * from_boundary)) / z)
        }
    }
}

/// Solves `boundary_randomized_rate(n_high, q) = delta` for `q` by bisection
/// on the closed-form stationary rate.
fn solve_boundary_probability(
    n_high: Threshold,
    delta: f64,
    params: &SourceChannelParams,
    f: &PenaltySpec,
) -> f64 {
    let rate = |q: f64| boundary_randomized_rate(n_high, q, params, f);
    if rate(0.0) >= delta {
        return 0.0;
    }
    if rate(1.0) <= delta {
        return 1.0;
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > delta {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}
