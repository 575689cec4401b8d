//! Closed-form quantities of the threshold-policy family: long-run Lagrangian
//! cost, activity margin, differential value function, update rate, and the
//! stationary distribution of the induced birth-death chain.
//!
//! For a threshold `n >= 1` the chain climbs with probability `beta` below
//! the threshold and `a` at or above it, and resets to `0` otherwise. The
//! long-run Lagrangian cost of that policy is
//!
//! ```text
//!           f(0)/(1-alpha) + sum_{j=1}^{n-1} f(j) beta^{j-1}
//!               + beta^{n-1} [ T(n) + lambda/(1-a) ]
//! theta_n = ------------------------------------------------
//!           1/(1-alpha) + (1-beta^{n-1})/(1-beta) + beta^{n-1}/(1-a)
//! ```
//!
//! where `T(n) = sum_{k>=n} f(k) a^{k-n}` is the transmit-region tail. The
//! activity margin
//!
//! ```text
//! H(n) = [ -theta_n (beta-a) + lambda (beta-1) ] / [ (1-a)(beta-a) ] + T(n)
//! ```
//!
//! equals `V(n) - lambda/(beta-a)` under the threshold-n value function; it
//! is non-decreasing in `n`, and the optimal threshold for multiplier
//! `lambda` is `inf{n >= 1 : H(n) > 0} - 1`.
//!
//! Saturating penalties replace the infinite tail by the exact finite form
//! `sum_{k=n}^{S_thresh-1} f(k) a^{k-n} + f(S_thresh) a^{S_thresh-n}/(1-a)`
//! and admit a never-transmit policy. All formulas use explicit algebraic
//! limits for `beta = 1` (geometric sums become counts) and `a = 0`, never
//! epsilon-perturbation.

use crate::model::{PenaltyKind, PenaltySpec, SourceChannelParams, State, Threshold};
use crate::{Error, Result};

/// Default per-term precision for truncating infinite tails.
pub const DEFAULT_EPS_TAIL: f64 = 1e-12;

/// Consecutive sub-threshold terms required before a tail is declared
/// converged. A single small term is not proof of decay when `f(k) a^k` is
/// not monotone.
const TAIL_STOP_RUN: u32 = 10;

/// Hard cap on summed tail terms before suspecting a divergent series.
const TAIL_TERM_CAP: u64 = 1_000_000;

/// `sum_{k=0}^{m-1} r^k`, with the exact limit `m` at `r = 1`.
///
/// Computed through `expm1`/`ln` so that `r` just below 1 keeps full relative
/// precision instead of cancelling in `1 - r^m`.
pub(crate) fn geom_sum(r: f64, m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if r == 1.0 {
        return m as f64;
    }
    if r == 0.0 {
        return 1.0;
    }
    -(m as f64 * r.ln()).exp_m1() / (1.0 - r)
}

/// Tail series `sum_{k=n}^{inf} f(k) ratio^(k-n)`.
///
/// Bounded penalties get the exact closed tail (the saturated value decays
/// geometrically past `s_thresh`). Unbounded penalties are summed until
/// [`TAIL_STOP_RUN`] consecutive terms fall below `eps_tail * (1 - ratio)`,
/// which bounds the discarded remainder by roughly `eps_tail` once the terms
/// really decay; if the stop rule is not met within [`TAIL_TERM_CAP`] terms
/// the series is reported as divergence-suspected.
pub fn tail_sum(f: &PenaltySpec, ratio: f64, n: State, eps_tail: f64) -> Result<f64> {
    debug_assert!((0.0..1.0).contains(&ratio), "tail ratio must be in [0,1)");
    debug_assert!(eps_tail > 0.0);
    if let PenaltyKind::Bounded { s_thresh, .. } = f.kind() {
        if n >= s_thresh {
            // f is constant from s_thresh on.
            return Ok(f.eval(s_thresh) / (1.0 - ratio));
        }
        let mut sum = 0.0;
        let mut pow = 1.0;
        for k in n..s_thresh {
            sum += f.eval(k) * pow;
            pow *= ratio;
        }
        return Ok(sum + f.eval(s_thresh) * pow / (1.0 - ratio));
    }

    let cutoff = eps_tail * (1.0 - ratio);
    let mut sum = 0.0;
    let mut pow = 1.0;
    let mut run = 0u32;
    let mut terms = 0u64;
    let mut k = n;
    loop {
        let term = f.eval(k) * pow;
        sum += term;
        terms += 1;
        run = if term < cutoff { run + 1 } else { 0 };
        if run >= TAIL_STOP_RUN {
            return Ok(sum);
        }
        if terms >= TAIL_TERM_CAP {
            return Err(Error::DivergenceSuspected { terms });
        }
        pow *= ratio;
        k += 1;
    }
}

/// Long-run Lagrangian cost `theta_n` of the threshold-`n` policy, `n >= 1`.
/// For bounded penalties `n` must not exceed `s_thresh`.
pub fn theta(
    n: u64,
    lambda: f64,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    eps_tail: f64,
) -> Result<f64> {
    debug_assert!(n >= 1);
    debug_assert!(f.s_thresh().map_or(true, |s| n <= s));
    let alpha = params.alpha();
    let beta = params.beta();
    let a = params.a();
    let beta_pow = beta.powf((n - 1) as f64);
    let tail = tail_sum(f, a, n, eps_tail)?;

    let mut below = 0.0;
    let mut pow = 1.0;
    for j in 1..n {
        below += f.eval(j) * pow;
        pow *= beta;
    }

    let numer =
        f.eval(0) / (1.0 - alpha) + below + beta_pow * tail + lambda * beta_pow / (1.0 - a);
    let denom = 1.0 / (1.0 - alpha) + geom_sum(beta, n - 1) + beta_pow / (1.0 - a);
    Ok(numer / denom)
}

/// Activity margin `H(n) = V(n) - lambda/(beta-a)` of the threshold-`n`
/// policy; its first sign change over `n` locates the optimal threshold.
pub fn h_margin(
    n: u64,
    lambda: f64,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    eps_tail: f64,
) -> Result<f64> {
    let beta = params.beta();
    let a = params.a();
    let th = theta(n, lambda, params, f, eps_tail)?;
    let tail = tail_sum(f, a, n, eps_tail)?;
    Ok((-th * (beta - a) + lambda * (beta - 1.0)) / ((1.0 - a) * (beta - a)) + tail)
}

/// One threshold's search quantities bundled for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdEval {
    /// Threshold index (`n >= 1`).
    pub n: u64,
    /// Long-run Lagrangian cost of the pure threshold-`n` policy.
    pub theta: f64,
    /// Activity margin at `n`.
    pub h: f64,
    /// Update rate of the pure threshold-`n` policy.
    pub c: f64,
}

/// Evaluates `theta_n`, `H(n)` and the update rate for one threshold.
pub fn evaluate_threshold(
    n: u64,
    lambda: f64,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    eps_tail: f64,
) -> Result<ThresholdEval> {
    Ok(ThresholdEval {
        n,
        theta: theta(n, lambda, params, f, eps_tail)?,
        h: h_margin(n, lambda, params, f, eps_tail)?,
        c: update_rate(Threshold::At(n), params),
    })
}

/// Differential value function of a threshold policy, normalized to
/// `V(0) = 0`.
///
/// `Always` is evaluated as threshold 1: the two policies induce the same
/// chain, and the threshold search never needs a separate value function for
/// it. `Never` (bounded penalties, `beta < 1`) is the all-idle chain.
pub fn value_function(
    s: State,
    n: Threshold,
    lambda: f64,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    eps_tail: f64,
) -> Result<f64> {
    if s == 0 {
        return Ok(0.0);
    }
    let beta = params.beta();
    let a = params.a();
    let n = match n {
        Threshold::Never => return never_value(s, params, f, eps_tail),
        other => other.dynamics_index().expect("not Never"),
    };
    let s_eff = match f.kind() {
        PenaltyKind::Bounded { s_thresh, .. } => s.min(s_thresh),
        PenaltyKind::Unbounded => s,
    };
    let th = theta(n, lambda, params, f, eps_tail)?;
    if s_eff >= n {
        // Forward induction over the transmit region.
        Ok((-th + lambda) / (1.0 - a) + tail_sum(f, a, s_eff, eps_tail)?)
    } else {
        // Backward induction over the idle region down from V(n).
        let v_n = (-th + lambda) / (1.0 - a) + tail_sum(f, a, n, eps_tail)?;
        let span = n - s_eff;
        let mut mid = 0.0;
        let mut pow = 1.0;
        for j in s_eff..n {
            mid += f.eval(j) * pow;
            pow *= beta;
        }
        Ok(-th * geom_sum(beta, span) + mid + beta.powf(span as f64) * v_n)
    }
}

/// Value function of the never-transmit policy on the lumped bounded chain.
fn never_value(
    s: State,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    eps_tail: f64,
) -> Result<f64> {
    let s_thresh = f.s_thresh().ok_or(Error::Param {
        name: "threshold",
        reason: "never-transmit value function requires a bounded penalty".into(),
    })?;
    let beta = params.beta();
    if beta == 1.0 {
        return Err(Error::AbsorbingChain);
    }
    let th = average_penalty(Threshold::Never, params, f, eps_tail)?;
    // Top state self-loops: theta + V(top) = f(top) + beta V(top).
    let mut v = (f.eval(s_thresh) - th) / (1.0 - beta);
    let mut state = s_thresh;
    let s = s.min(s_thresh);
    while state > s {
        state -= 1;
        v = f.eval(state) - th + beta * v;
    }
    Ok(v)
}

/// Long-run update rate of a threshold policy.
///
/// `C(Always) = 1`, `C(Never) = 0`, and for `n >= 1`
///
/// ```text
/// C(n) = (1-alpha) beta^(n-1)
///        / [ (1-a) (1 + (1-alpha)(1-beta^n)/(1-beta)
///                     + (1-alpha) a beta^(n-1)/(1-a)) ]
/// ```
///
/// strictly decreasing in `n`, with `C(1) = vartheta`.
pub fn update_rate(n: Threshold, params: &SourceChannelParams) -> f64 {
    let n = match n {
        Threshold::Always => return 1.0,
        Threshold::Never => return 0.0,
        Threshold::At(n) => n,
    };
    let alpha = params.alpha();
    let beta = params.beta();
    let a = params.a();
    let beta_pow = beta.powf((n - 1) as f64);
    let denom = 1.0
        + (1.0 - alpha) * geom_sum(beta, n)
        + (1.0 - alpha) * a * beta_pow / (1.0 - a);
    (1.0 - alpha) * beta_pow / ((1.0 - a) * denom)
}

/// Stationary probability of the in-sync state under a threshold policy.
/// `Always` shares the threshold-1 chain; the never-transmit chain loses all
/// mass from state 0 when `beta = 1`.
pub fn sigma_zero(n: Threshold, params: &SourceChannelParams) -> f64 {
    let alpha = params.alpha();
    let beta = params.beta();
    let a = params.a();
    match n.dynamics_index() {
        Some(n) => {
            let beta_pow = beta.powf((n - 1) as f64);
            1.0 / (1.0
                + (1.0 - alpha) * geom_sum(beta, n)
                + (1.0 - alpha) * a * beta_pow / (1.0 - a))
        }
        None => {
            if beta == 1.0 {
                0.0
            } else {
                1.0 / (1.0 + (1.0 - alpha) / (1.0 - beta))
            }
        }
    }
}

/// Long-run probability of mismatch, `1 - sigma_0`; this is the average of
/// the indicator penalty under the policy.
pub fn average_error(n: Threshold, params: &SourceChannelParams) -> f64 {
    1.0 - sigma_zero(n, params)
}

/// Stationary distribution of the chain induced by a threshold policy.
///
/// Bounded penalties produce the exact lumped chain over `0..=s_thresh`
/// (geometric tail mass folded into the top state). Unbounded penalties
/// store `0..=k_cap` states; the remaining geometric tail is accounted for
/// by [`StationaryDistribution::total_mass`].
pub fn stationary_distribution(
    n: Threshold,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    k_cap: u64,
) -> Result<StationaryDistribution> {
    let alpha = params.alpha();
    let beta = params.beta();
    let a = params.a();

    if let (None, PenaltyKind::Bounded { s_thresh, .. }) = (n.dynamics_index(), f.kind()) {
        // Never-transmit over the lumped chain.
        if beta == 1.0 {
            let mut probs = vec![0.0; (s_thresh + 1) as usize];
            probs[s_thresh as usize] = 1.0;
            return Ok(StationaryDistribution {
                probs,
                threshold: n,
                tail_ratio: None,
            });
        }
        let sigma0 = sigma_zero(n, params);
        let mut probs = Vec::with_capacity((s_thresh + 1) as usize);
        probs.push(sigma0);
        let mut pow = 1.0;
        for _k in 1..s_thresh {
            probs.push((1.0 - alpha) * pow * sigma0);
            pow *= beta;
        }
        probs.push((1.0 - alpha) * pow / (1.0 - beta) * sigma0);
        return Ok(StationaryDistribution {
            probs,
            threshold: n,
            tail_ratio: None,
        });
    }

    let n_dyn = n.dynamics_index().ok_or(Error::AbsorbingChain)?;
    let sigma0 = sigma_zero(n, params);

    match f.kind() {
        // Lumping the states above s_thresh is valid only when the policy is
        // constant across them, i.e. the threshold does not exceed s_thresh;
        // otherwise fall through to the real-chain representation.
        PenaltyKind::Bounded { s_thresh, .. } if n_dyn <= s_thresh => {
            let mut probs = Vec::with_capacity((s_thresh + 1) as usize);
            probs.push(sigma0);
            let mut pow = 1.0 - alpha;
            for k in 1..s_thresh {
                probs.push(pow * sigma0);
                pow *= if k < n_dyn { beta } else { a };
            }
            // Lumped top state absorbs the geometric remainder.
            let top = (1.0 - alpha)
                * beta.powf((n_dyn - 1) as f64)
                * a.powf((s_thresh - n_dyn) as f64)
                / (1.0 - a)
                * sigma0;
            probs.push(top);
            Ok(StationaryDistribution {
                probs,
                threshold: n,
                tail_ratio: None,
            })
        }
        _ => {
            let len = (k_cap.max(n_dyn) + 1) as usize;
            let mut probs = Vec::with_capacity(len);
            probs.push(sigma0);
            let mut pow = 1.0 - alpha;
            for k in 1..len as u64 {
                probs.push(pow * sigma0);
                pow *= if k < n_dyn { beta } else { a };
            }
            Ok(StationaryDistribution {
                probs,
                threshold: n,
                tail_ratio: Some(a),
            })
        }
    }
}

/// Stationary distribution of a threshold-policy chain.
#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    probs: Vec<f64>,
    threshold: Threshold,
    /// Geometric decay ratio past the stored range (unbounded supports only).
    tail_ratio: Option<f64>,
}

impl StationaryDistribution {
    /// Probability of state `k`; zero beyond the stored range for lumped
    /// chains, geometric extrapolation otherwise.
    pub fn prob(&self, k: State) -> f64 {
        let idx = k as usize;
        if idx < self.probs.len() {
            return self.probs[idx];
        }
        match self.tail_ratio {
            Some(r) => {
                let last = *self.probs.last().unwrap();
                last * r.powf((idx + 1 - self.probs.len()) as f64)
            }
            None => 0.0,
        }
    }

    /// Stored probabilities, index = state.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Threshold that induced the chain.
    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    /// Total mass including the closed-form geometric tail beyond the stored
    /// range; equals 1 up to floating-point rounding.
    pub fn total_mass(&self) -> f64 {
        let stored: f64 = self.probs.iter().sum();
        match self.tail_ratio {
            Some(r) => stored + self.probs.last().unwrap() * r / (1.0 - r),
            None => stored,
        }
    }

    /// Mass at or above state `n` — the update rate when `n` is the policy's
    /// threshold.
    pub fn mass_from(&self, n: State) -> f64 {
        let upper: f64 = self.probs.iter().skip(n as usize).sum();
        match self.tail_ratio {
            Some(r) => upper + self.probs.last().unwrap() * r / (1.0 - r),
            None => upper,
        }
    }
}

/// Long-run average penalty `sum_k sigma_k f(k)` of a threshold policy, with
/// the geometric tail against `f` evaluated by the same guarded tail sum as
/// the optimizer.
pub fn average_penalty(
    n: Threshold,
    params: &SourceChannelParams,
    f: &PenaltySpec,
    eps_tail: f64,
) -> Result<f64> {
    let alpha = params.alpha();
    let beta = params.beta();
    let a = params.a();

    let Some(n_dyn) = n.dynamics_index() else {
        // Never transmit.
        return match f.kind() {
            PenaltyKind::Bounded { s_thresh, .. } => {
                if beta == 1.0 {
                    // Absorbed at the saturated state.
                    return Ok(f.eval(s_thresh));
                }
                let sigma0 = sigma_zero(n, params);
                let mut sum = f.eval(0);
                let mut pow = 1.0 - alpha;
                for k in 1..s_thresh {
                    sum += pow * f.eval(k);
                    pow *= beta;
                }
                sum += pow / (1.0 - beta) * f.eval(s_thresh);
                Ok(sigma0 * sum)
            }
            PenaltyKind::Unbounded => {
                if beta == 1.0 {
                    return Err(Error::AbsorbingChain);
                }
                let sigma0 = sigma_zero(n, params);
                Ok(sigma0 * (f.eval(0) + (1.0 - alpha) * tail_sum(f, beta, 1, eps_tail)?))
            }
        };
    };

    // One formula serves both kinds: the chain is the real threshold-n chain
    // (geometric with ratio beta below n and a above), and the scoring f is
    // already truncated by eval(). For bounded f the tail sum is the exact
    // closed form, so no truncation error enters.
    let sigma0 = sigma_zero(n, params);
    let mut below = 0.0;
    let mut pow = 1.0;
    for k in 1..=n_dyn {
        below += f.eval(k) * pow;
        pow *= beta;
    }
    let beta_pow = beta.powf((n_dyn - 1) as f64);
    let tail = tail_sum(f, a, n_dyn + 1, eps_tail)?;
    Ok(sigma0 * (f.eval(0) + (1.0 - alpha) * (below + beta_pow * a * tail)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SourceChannelParams;

    fn params() -> SourceChannelParams {
        SourceChannelParams::new(0.2, 0.9, 0.8, 0.5).unwrap()
    }

    fn linear() -> PenaltySpec {
        PenaltySpec::unbounded_with_probe("linear", |s| s as f64, 1000).unwrap()
    }

    fn error_pen() -> PenaltySpec {
        PenaltySpec::bounded("error", |s| (s > 0) as u64 as f64, 1, 1.0, 1e-9).unwrap()
    }

    #[test]
    fn geom_sum_limits() {
        assert_eq!(geom_sum(1.0, 7), 7.0);
        assert_eq!(geom_sum(0.5, 0), 0.0);
        assert!((geom_sum(0.9, 3) - (1.0 + 0.9 + 0.81)).abs() < 1e-14);
        // Near-one ratio keeps relative precision.
        let m = 12u64;
        let r = 1.0 - 1e-9;
        let exact = m as f64 - 1e-9 * (m * (m - 1) / 2) as f64;
        assert!((geom_sum(r, m) - exact).abs() / exact < 1e-12);
    }

    #[test]
    fn tail_sum_geometric_series() {
        let ones = PenaltySpec::unbounded_with_probe("one", |_| 1.0, 100).unwrap();
        let got = tail_sum(&ones, 0.26, 5, 1e-12).unwrap();
        assert!((got - 1.0 / 0.74).abs() < 1e-9);
    }

    #[test]
    fn tail_sum_arithmetico_geometric() {
        // sum k * 0.5^k = 0.5 / 0.25 = 2
        let got = tail_sum(&linear(), 0.5, 0, 1e-12).unwrap();
        assert!((got - 2.0).abs() < 1e-9);
    }

    #[test]
    fn tail_sum_exact_for_bounded() {
        let f = error_pen();
        // sum_{k>=1} 1 * a^{k-1} = 1/(1-a), no truncation involved.
        let got = tail_sum(&f, 0.26, 1, 1e-12).unwrap();
        assert_eq!(got, 1.0 / 0.74);
        // From inside the saturated region.
        assert_eq!(tail_sum(&f, 0.26, 3, 1e-12).unwrap(), 1.0 / 0.74);
    }

    #[test]
    fn tail_sum_flags_divergence() {
        // f(k) = 2^k against a = 0.9 diverges.
        let f = PenaltySpec::unbounded_with_probe("exp2", |s| 2f64.powf(s as f64), 64).unwrap();
        let err = tail_sum(&f, 0.9, 0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::DivergenceSuspected { .. }));
    }

    #[test]
    fn theta_linear_threshold_one() {
        // theta_1 = (1/(1-a)^2) / (1/(1-alpha) + 1/(1-a))
        let got = theta(1, 0.0, &params(), &linear(), 1e-12).unwrap();
        let expect = (1.0 / (0.74 * 0.74)) / (1.25 + 1.0 / 0.74);
        assert!((got - expect).abs() < 1e-9);
        assert!((got - 0.7020007).abs() < 1e-6);
    }

    #[test]
    fn theta_error_threshold_one() {
        let got = theta(1, 0.0, &params(), &error_pen(), 1e-12).unwrap();
        let expect = (1.0 / 0.74) / (1.25 + 1.0 / 0.74);
        assert!((got - expect).abs() < 1e-12);
        // Equals 1 - sigma_0 of the threshold-1 chain.
        assert!((got - average_error(Threshold::At(1), &params())).abs() < 1e-12);
    }

    #[test]
    fn theta_finite_at_beta_one() {
        let p = SourceChannelParams::new(0.2, 1.0, 1.0, 0.5).unwrap();
        let f = PenaltySpec::bounded("step", |s| (s > 0) as u64 as f64, 1, 1.0, 1e-9).unwrap();
        let got = theta(1, 2.0, &p, &f, 1e-12).unwrap();
        assert!(got.is_finite());
    }

    #[test]
    fn h_margin_linear_at_zero_multiplier() {
        let got = h_margin(1, 0.0, &params(), &linear(), 1e-12).unwrap();
        // -theta_1/(1-a) + 1/(1-a)^2 = -0.948650 + 1.826150
        assert!((got - 0.8775009).abs() < 1e-5);
        assert!(got > 0.0);
    }

    #[test]
    fn value_function_normalization_and_first_step() {
        let p = params();
        let f = linear();
        for n in [2u64, 5, 9] {
            let v0 = value_function(0, Threshold::At(n), 1.5, &p, &f, 1e-12).unwrap();
            assert_eq!(v0, 0.0);
            // V(1) = (theta_n - f(0)) / (1 - alpha)
            let v1 = value_function(1, Threshold::At(n), 1.5, &p, &f, 1e-12).unwrap();
            let th = theta(n, 1.5, &p, &f, 1e-12).unwrap();
            assert!(
                (v1 - th / 0.8).abs() < 1e-9,
                "n={n}: v1={v1} vs {}",
                th / 0.8
            );
        }
    }

    #[test]
    fn value_function_branches_agree_at_threshold() {
        // Unroll the backward recursion once: V(n-1) = -theta + f(n-1) + beta V(n)
        // must match the backward-branch formula.
        let p = params();
        let f = linear();
        for n in [2u64, 4, 8] {
            let lambda = 1.2;
            let th = theta(n, lambda, &p, &f, 1e-12).unwrap();
            let v_n = value_function(n, Threshold::At(n), lambda, &p, &f, 1e-12).unwrap();
            let direct = -th + f.eval(n - 1) + p.beta() * v_n;
            let v_nm1 = value_function(n - 1, Threshold::At(n), lambda, &p, &f, 1e-12).unwrap();
            assert!((v_nm1 - direct).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn value_function_monotone_in_state_at_the_consistent_threshold() {
        // Monotonicity is a property of the lambda-optimal threshold, i.e.
        // the n with H(n) <= 0 < H(n+1); a mismatched pair need not be
        // monotone in the idle region.
        let p = params();
        let f = linear();
        for lambda in [0.5, 2.0, 8.0] {
            let mut n = 1;
            while h_margin(n + 1, lambda, &p, &f, 1e-12).unwrap() <= 0.0 {
                n += 1;
            }
            let mut prev = 0.0;
            for s in 1..=60u64 {
                let v = value_function(s, Threshold::At(n), lambda, &p, &f, 1e-12).unwrap();
                assert!(v >= prev - 1e-9, "lambda={lambda} n={n} s={s}: {v} < {prev}");
                prev = v;
            }
        }
    }

    #[test]
    fn update_rate_ends_and_critical_rate() {
        let p = params();
        assert_eq!(update_rate(Threshold::Always, &p), 1.0);
        assert_eq!(update_rate(Threshold::Never, &p), 0.0);
        let c1 = update_rate(Threshold::At(1), &p);
        assert!((c1 - p.vartheta()).abs() < 1e-12);
        assert!((c1 - 0.519481).abs() < 1e-6);
        let mut prev = c1;
        for n in 2..=30 {
            let c = update_rate(Threshold::At(n), &p);
            assert!(c < prev, "rate must strictly decrease at n={n}");
            prev = c;
        }
    }

    #[test]
    fn stationary_two_state_chain() {
        // beta = 1, p_s = 1 (a = 0), threshold 1: sigma_0 = 1/(2 - alpha).
        let p = SourceChannelParams::new(0.2, 1.0, 1.0, 0.5).unwrap();
        let f = error_pen();
        let d = stationary_distribution(Threshold::At(1), &p, &f, 10).unwrap();
        assert!((d.prob(0) - 5.0 / 9.0).abs() < 1e-12);
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_mass_from_threshold_equals_update_rate() {
        let p = params();
        let f = linear();
        for n in [1u64, 2, 5, 12] {
            let d = stationary_distribution(Threshold::At(n), &p, &f, 400).unwrap();
            assert!((d.total_mass() - 1.0).abs() < 1e-9, "n={n}");
            let c = update_rate(Threshold::At(n), &p);
            assert!((d.mass_from(n) - c).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn average_penalty_two_state_error_chain() {
        let p = SourceChannelParams::new(0.2, 1.0, 1.0, 0.5).unwrap();
        let got = average_penalty(Threshold::At(1), &p, &error_pen(), 1e-12).unwrap();
        assert!((got - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn average_penalty_matches_stationary_sum() {
        let p = params();
        let f = linear();
        for n in [1u64, 2, 7] {
            let closed = average_penalty(Threshold::At(n), &p, &f, 1e-12).unwrap();
            let d = stationary_distribution(Threshold::At(n), &p, &f, 600).unwrap();
            let brute: f64 = (0..=600u64).map(|k| d.prob(k) * f.eval(k)).sum();
            assert!((closed - brute).abs() < 1e-8, "n={n}: {closed} vs {brute}");
        }
    }

    #[test]
    fn average_penalty_never_transmit() {
        let p = params();
        // beta < 1: matches the no-transmission chain sum.
        let f = linear();
        let closed = average_penalty(Threshold::Never, &p, &f, 1e-12).unwrap();
        let sigma0 = sigma_zero(Threshold::Never, &p);
        // sum k beta^{k-1} = 1/(1-beta)^2
        let expect = sigma0 * 0.8 / (0.1 * 0.1);
        assert!((closed - expect).abs() < 1e-6);

        // Absorbing case errors out for unbounded penalties...
        let p1 = SourceChannelParams::new(0.2, 1.0, 1.0, 0.5).unwrap();
        assert!(matches!(
            average_penalty(Threshold::Never, &p1, &f, 1e-12),
            Err(Error::AbsorbingChain)
        ));
        // ...and saturates for bounded ones.
        let fire_like =
            PenaltySpec::bounded("sat", |s| (s.min(4)) as f64, 4, 4.0, 1e-9).unwrap();
        let got = average_penalty(Threshold::Never, &p1, &fire_like, 1e-12).unwrap();
        assert_eq!(got, 4.0);
    }

    #[test]
    fn beta_limit_forms_agree() {
        // beta = 1 closed forms vs beta = 1 - 1e-9 generic evaluation.
        let exact = SourceChannelParams::new(0.2, 1.0, 1.0, 0.5).unwrap();
        let near = SourceChannelParams::new(0.2, 1.0 - 1e-9, 1.0, 0.5).unwrap();
        let f = PenaltySpec::bounded("sat", |s| s.min(6) as f64, 6, 6.0, 1e-9).unwrap();
        for n in [1u64, 3, 6] {
            let t1 = theta(n, 0.7, &exact, &f, 1e-12).unwrap();
            let t2 = theta(n, 0.7, &near, &f, 1e-12).unwrap();
            assert!((t1 - t2).abs() / t1.abs() < 1e-6, "theta n={n}");
            let c1 = update_rate(Threshold::At(n), &exact);
            let c2 = update_rate(Threshold::At(n), &near);
            assert!((c1 - c2).abs() / c1 < 1e-6, "rate n={n}");
            let h1 = h_margin(n, 0.7, &exact, &f, 1e-12).unwrap();
            let h2 = h_margin(n, 0.7, &near, &f, 1e-12).unwrap();
            assert!((h1 - h2).abs() / h1.abs().max(1.0) < 1e-6, "H n={n}");
        }
    }
}
