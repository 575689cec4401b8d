//! Seeded Monte-Carlo evaluation of arbitrary policies on the exact one-step
//! dynamics, plus a rate-constrained information-age baseline policy.
//!
//! One slot proceeds as: the policy observes its state (mismatch age `S` for
//! the AoII family, delivery age `A` for the age baseline) and possibly draws
//! its own randomization; penalty `f(S)`, error `1{S != 0}` and the action
//! are scored at the start-of-slot state; then the state advances on one
//! channel uniform and one source uniform. A run is a pure function of
//! `(seed, stream, policy, params, f, slots)`.
//!
//! Two RNG streams are derived per run: the dynamics stream consumes exactly
//! two uniforms per slot regardless of the action, and the policy's own
//! randomization draws from a separate stream. Runs of *different policies*
//! under the same `(seed, stream)` therefore share the channel/source sample
//! path (common random numbers), which tightens policy comparisons; two
//! policies that never disagree on an action produce bit-identical
//! trajectories.
//!
//! Confidence half-widths come from batch means over 100 batches; the
//! trajectory is autocorrelated, so per-slot i.i.d. intervals would be wrong.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::model::{Action, PenaltySpec, SourceChannelParams, State, Threshold};
use crate::{Error, Result};

/// Number of batches used for batch-means confidence intervals.
const BATCHES: u64 = 100;

/// Executable transmission policies.
///
/// Decisions depend only on the current observable state and the policy's own
/// randomization; nothing looks into the future.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Pure threshold rule on the mismatch age, including `Always`/`Never`.
    Threshold(Threshold),
    /// Threshold rule with per-slot randomization at the boundary: transmit
    /// above `boundary`, transmit with probability `q` at it, idle below.
    /// With `lumped` set the boundary stands for the whole saturated region
    /// `S >= boundary` of a truncated penalty model (and nothing lies above).
    BoundaryRandomized { boundary: State, q: f64, lumped: bool },
    /// Age-threshold rule for the information-age baseline: transmit when the
    /// delivery age reaches `age`, with probability `q` one slot earlier.
    AgeThreshold { age: u64, q: f64 },
}

impl Policy {
    fn decide<R: Rng>(&self, s: State, age: u64, rng: &mut R) -> Action {
        match *self {
            Policy::Threshold(Threshold::Always) => Action::Transmit,
            Policy::Threshold(Threshold::Never) => Action::Idle,
            Policy::Threshold(Threshold::At(n)) => {
                if s >= n {
                    Action::Transmit
                } else {
                    Action::Idle
                }
            }
            Policy::BoundaryRandomized { boundary, q, lumped } => {
                if lumped {
                    if s >= boundary && rng.gen_bool(q) {
                        Action::Transmit
                    } else {
                        Action::Idle
                    }
                } else if s > boundary {
                    Action::Transmit
                } else if s == boundary && rng.gen_bool(q) {
                    Action::Transmit
                } else {
                    Action::Idle
                }
            }
            Policy::AgeThreshold { age: m, q } => {
                if age >= m {
                    Action::Transmit
                } else if age + 1 == m && rng.gen_bool(q) {
                    Action::Transmit
                } else {
                    Action::Idle
                }
            }
        }
    }
}

/// Empirical long-run averages of one run with 95% batch-means half-widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimStats {
    /// Time-average of `f(S_t)`.
    pub avg_penalty: f64,
    /// Time-average of `1{S_t != 0}`.
    pub avg_error: f64,
    /// Time-average of the transmit indicator.
    pub rate: f64,
    /// 95% half-width for `avg_penalty`.
    pub hw_penalty: f64,
    /// 95% half-width for `avg_error`.
    pub hw_error: f64,
    /// 95% half-width for `rate`.
    pub hw_rate: f64,
    /// Horizon in slots.
    pub slots: u64,
    /// Base RNG seed.
    pub seed: u64,
    /// RNG stream index (for independent replications).
    pub stream: u64,
}

/// One-step sampler of the mismatch-age kernel. Returns the next state and
/// whether a packet was delivered; marginally over the channel the next
/// state follows [`crate::model::transition_distribution`], which the tests
/// check by frequency counts.
///
/// Exactly two uniforms are consumed per call — channel first, source second
/// — independent of the action, so trajectories driven by the same RNG
/// stream stay aligned across policies.
pub fn sample_transition<R: Rng>(
    s: State,
    action: Action,
    params: &SourceChannelParams,
    rng: &mut R,
) -> (State, bool) {
    let u_channel: f64 = rng.gen();
    let u_source: f64 = rng.gen();
    let delivered = action == Action::Transmit && u_channel < params.p_s();
    let next = if s == 0 {
        // The in-sync regime ignores deliveries.
        if u_source < params.alpha() {
            0
        } else {
            1
        }
    } else {
        let stays = u_source < params.beta();
        // A delivery resets the mismatch iff the source kept the sampled
        // value; absent one the mismatch persists iff it did.
        if stays != delivered {
            s + 1
        } else {
            0
        }
    };
    (next, delivered)
}

/// Simulates `policy` for `slots` slots from `S_0 = 0` on RNG stream 0.
pub fn simulate(
    policy: &Policy,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    slots: u64,
    seed: u64,
) -> SimStats {
    simulate_stream(policy, params, f, slots, seed, 0)
}

/// Simulates on an explicit RNG stream; streams with the same seed are
/// statistically independent, so replications can run in parallel and merge.
///
/// Stream `i` internally derives dynamics stream `2i` and policy stream
/// `2i + 1`, so different policies simulated under the same `(seed, stream)`
/// face the same channel/source realizations.
pub fn simulate_stream(
    policy: &Policy,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    slots: u64,
    seed: u64,
    stream: u64,
) -> SimStats {
    assert!(slots >= BATCHES, "need at least {BATCHES} slots");
    let mut dyn_rng = ChaCha12Rng::seed_from_u64(seed);
    dyn_rng.set_stream(2 * stream);
    let mut pol_rng = ChaCha12Rng::seed_from_u64(seed);
    pol_rng.set_stream(2 * stream + 1);

    let batch_len = slots / BATCHES;
    let used = batch_len * BATCHES;
    let mut pen_batches = [0.0f64; BATCHES as usize];
    let mut err_batches = [0.0f64; BATCHES as usize];
    let mut tx_batches = [0.0f64; BATCHES as usize];

    let mut s: State = 0;
    let mut age: u64 = 1;
    for t in 0..used {
        let b = (t / batch_len) as usize;
        let action = policy.decide(s, age, &mut pol_rng);
        pen_batches[b] += f.eval(s);
        if s != 0 {
            err_batches[b] += 1.0;
        }
        if action == Action::Transmit {
            tx_batches[b] += 1.0;
        }
        let (next, delivered) = sample_transition(s, action, params, &mut dyn_rng);
        s = next;
        age = if delivered { 1 } else { age + 1 };
    }

    let n = batch_len as f64;
    let (avg_penalty, hw_penalty) = batch_stats(&pen_batches, n);
    let (avg_error, hw_error) = batch_stats(&err_batches, n);
    let (rate, hw_rate) = batch_stats(&tx_batches, n);
    SimStats {
        avg_penalty,
        avg_error,
        rate,
        hw_penalty,
        hw_error,
        hw_rate,
        slots: used,
        seed,
        stream,
    }
}

fn batch_stats(sums: &[f64], batch_len: f64) -> (f64, f64) {
    let k = sums.len() as f64;
    let means: Vec<f64> = sums.iter().map(|s| s / batch_len).collect();
    let mean = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, 1.96 * (var / k).sqrt())
}

/// Builds the rate-constrained information-age baseline policy for
/// `params.delta()`.
///
/// The baseline tracks only the delivery age `A` (reset to 1 by a successful
/// delivery, incremented otherwise) and minimizes the long-run average age.
/// It is solved with the same Lagrangian machinery as the main problem:
/// relative value iteration on the truncated age chain yields the optimal
/// age threshold for a fixed multiplier, the multiplier is bisected until the
/// closed-form rate `C(m) = 1 / (1 + p_s (m-1))` brackets the budget, and a
/// per-slot randomization one slot before the threshold meets the budget
/// exactly: `q = (m-1) - (1/delta - 1)/p_s`.
pub fn aoi_baseline(params: &SourceChannelParams) -> Result<Policy> {
    let delta = params.delta();
    let p_s = params.p_s();
    if delta >= 1.0 {
        return Ok(Policy::AgeThreshold { age: 1, q: 0.0 });
    }
    let rate = |m: u64| 1.0 / (1.0 + p_s * (m - 1) as f64);

    // Truncation with generous headroom over the largest threshold the
    // search can visit.
    let m_budget = 1.0 + (1.0 / delta - 1.0) / p_s;
    let k_age = ((m_budget * 16.0) as u64).max(200);

    let mut lambda_lo = 0.0f64;
    let mut lambda_hi = 1.0f64;
    let mut m_hi = age_greedy_threshold(lambda_hi, p_s, k_age)?;
    let mut doublings = 0;
    while rate(m_hi) > delta {
        lambda_lo = lambda_hi;
        lambda_hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::InfeasibleTolerance { delta });
        }
        m_hi = age_greedy_threshold(lambda_hi, p_s, k_age)?;
    }
    let mut mid = 0.5 * (lambda_lo + lambda_hi);
    while (lambda_hi - mid).abs() > 1e-6 {
        let m_mid = age_greedy_threshold(mid, p_s, k_age)?;
        if rate(m_mid) > delta {
            lambda_lo = mid;
        } else {
            lambda_hi = mid;
            m_hi = m_mid;
        }
        mid = 0.5 * (lambda_lo + lambda_hi);
    }
    // Walk back to the adjacent pair whose rates bracket the budget.
    while m_hi > 2 && rate(m_hi - 1) <= delta {
        m_hi -= 1;
    }
    let q = ((m_hi - 1) as f64 - (1.0 / delta - 1.0) / p_s).clamp(0.0, 1.0);
    Ok(Policy::AgeThreshold { age: m_hi, q })
}

/// Greedy age threshold of the multiplier problem `avg[A + lambda psi]`,
/// via relative value iteration on ages `1..=k`.
fn age_greedy_threshold(lambda: f64, p_s: f64, k: u64) -> Result<u64> {
    let k = k as usize;
    let tol = 1e-10;
    let max_iter = 200_000u64;
    // v[a] for ages 1..=k at indices 1..=k; index 0 unused.
    let mut v = vec![0.0f64; k + 1];
    let mut next = vec![0.0f64; k + 1];
    let mut residual = f64::INFINITY;
    let mut iter = 0;
    while iter < max_iter {
        let anchor = {
            let up = v[2.min(k)];
            let idle = up;
            let transmit = lambda + p_s * v[1] + (1.0 - p_s) * up;
            1.0 + idle.min(transmit)
        };
        let mut worst = 0.0f64;
        for age in 1..=k {
            let up = v[(age + 1).min(k)];
            let idle = up;
            let transmit = lambda + p_s * v[1] + (1.0 - p_s) * up;
            let new = age as f64 + idle.min(transmit) - anchor;
            let change = (new - v[age]).abs();
            if change > worst {
                worst = change;
            }
            next[age] = new;
        }
        std::mem::swap(&mut v, &mut next);
        residual = worst;
        iter += 1;
        if residual <= tol {
            break;
        }
    }
    if residual > tol {
        return Err(Error::NoConvergence {
            max_iter,
            residual,
        });
    }
    // Transmit at age A iff the reset is worth the multiplier:
    // lambda + p_s V(1) + p_f V(A+1) < V(A+1); values are anchored at age 1.
    let v1 = v[1];
    for age in 1..=k {
        let up = v[(age + 1).min(k)];
        if lambda + p_s * v1 + (1.0 - p_s) * up < up {
            return Ok(age as u64);
        }
    }
    Ok(k as u64 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps;
    use crate::closed_form::{average_penalty, update_rate};
    use crate::model::transition_distribution;

    fn params(delta: f64) -> SourceChannelParams {
        SourceChannelParams::new(0.2, 0.9, 0.8, delta).unwrap()
    }

    #[test]
    fn runs_are_reproducible() {
        let p = params(0.5);
        let f = apps::linear_f();
        let policy = Policy::Threshold(Threshold::At(2));
        let a = simulate(&policy, &p, &f, 50_000, 42);
        let b = simulate(&policy, &p, &f, 50_000, 42);
        assert_eq!(a, b);
        let c = simulate(&policy, &p, &f, 50_000, 43);
        assert_ne!(a.avg_penalty, c.avg_penalty);
        let d = simulate_stream(&policy, &p, &f, 50_000, 42, 1);
        assert_ne!(a.avg_penalty, d.avg_penalty);
    }

    #[test]
    fn two_state_chain_error_rate() {
        // beta = 1, p_s = 1: transmit-always holds the chain at two states
        // with sigma_0 = 1/(2 - alpha).
        let p = SourceChannelParams::new(0.2, 1.0, 1.0, 1.0).unwrap();
        let f = apps::error_f();
        let st = simulate(&Policy::Threshold(Threshold::Always), &p, &f, 1_000_000, 7);
        assert!(
            (st.avg_error - 4.0 / 9.0).abs() <= st.hw_error.max(2e-3),
            "err {} hw {}",
            st.avg_error,
            st.hw_error
        );
        // Indicator penalty makes the two accumulators identical.
        assert_eq!(st.avg_penalty, st.avg_error);
    }

    #[test]
    fn absorbing_fire_ends_at_full_damage() {
        let p = SourceChannelParams::new(0.2, 1.0, 1.0, 0.1).unwrap();
        let f = apps::fire_f(&apps::FireParams::paper()).unwrap();
        let st = simulate(&Policy::Threshold(Threshold::Never), &p, &f, 1_000_000, 9);
        assert!(st.avg_penalty > 9.99, "penalty {}", st.avg_penalty);
        assert_eq!(st.rate, 0.0);
    }

    #[test]
    fn threshold_policy_matches_closed_forms() {
        let p = params(0.5);
        let f = apps::linear_f();
        let n = Threshold::At(2);
        let st = simulate(&Policy::Threshold(n), &p, &f, 1_000_000, 11);
        let pen = average_penalty(n, &p, &f, 1e-12).unwrap();
        let rate = update_rate(n, &p);
        assert!((st.avg_penalty - pen).abs() / pen < 0.01, "{} vs {pen}", st.avg_penalty);
        assert!((st.rate - rate).abs() < 0.005, "{} vs {rate}", st.rate);
    }

    #[test]
    fn empirical_kernel_matches_transition_distribution() {
        // Frequency check of the one-step sampler against the kernel, within
        // 3-sigma binomial bounds per (state, action) row.
        let p = params(0.5);
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        let trials = 200_000u64;
        for s in [0u64, 1, 3, 20] {
            for action in [Action::Idle, Action::Transmit] {
                let dist = transition_distribution(s, action, &p);
                let mut grow = 0u64;
                for _ in 0..trials {
                    let (nxt, _) = sample_transition(s, action, &p, &mut rng);
                    if nxt == dist[0].0 {
                        grow += 1;
                    }
                }
                let expect = dist[0].1;
                let sd = (expect * (1.0 - expect) / trials as f64).sqrt();
                let got = grow as f64 / trials as f64;
                assert!(
                    (got - expect).abs() <= 3.0 * sd + 1e-9,
                    "s={s} {action:?}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn boundary_randomization_hits_the_budget_rate() {
        let p = params(0.4);
        let f = apps::linear_f();
        let sol = crate::optimizer::solve(&p, &f, &crate::optimizer::SolverOptions::default())
            .unwrap();
        let st = simulate(&sol.policy.to_sim_policy(&f), &p, &f, 2_000_000, 3);
        assert!((st.rate - 0.4).abs() < 0.003, "rate {}", st.rate);
    }

    #[test]
    fn age_baseline_unconstrained_transmits_every_slot() {
        let p = params(1.0);
        let policy = aoi_baseline(&p).unwrap();
        assert_eq!(policy, Policy::AgeThreshold { age: 1, q: 0.0 });
        let st = simulate(&policy, &p, &apps::linear_f(), 100_000, 5);
        assert_eq!(st.rate, 1.0);
    }

    #[test]
    fn age_baseline_meets_the_budget() {
        for delta in [0.1, 0.3, 0.6] {
            let p = params(delta);
            let policy = aoi_baseline(&p).unwrap();
            let st = simulate(&policy, &p, &apps::linear_f(), 1_000_000, 17);
            assert!(
                (st.rate - delta).abs() < 0.005,
                "delta={delta}: rate {}",
                st.rate
            );
        }
    }
}
