//! Source/channel parameterization, penalty specifications, and the exact
//! one-step dynamics of the mismatch-age process.
//!
//! Absent deliveries, the binary mismatch indicator follows a two-state
//! Markov chain: it stays in sync with probability `alpha` and stays wrong
//! with probability `beta`. A transmission succeeds with probability `p_s`,
//! and a successful delivery resets the mismatch unless the source moved
//! while the packet was in flight. Folding the channel into the source chain
//! gives the effective persistence of a mismatch under transmission:
//!
//! ```text
//! a = p_f * beta + (1 - beta) * p_s,     p_f = 1 - p_s
//! ```
//!
//! Transmission is useful only when `a < beta`; validation rejects anything
//! else. The critical rate
//!
//! ```text
//! vartheta = (1 - alpha) / (2 - alpha - a)
//! ```
//!
//! is the long-run update rate of the policy that transmits whenever the
//! state is non-zero; rate budgets at or above it are non-binding.

use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// Mismatch age: number of consecutive slots the receiver's estimate has been
/// wrong. `0` means the estimate is currently in sync.
pub type State = u64;

/// Per-slot decision of the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Stay silent for the slot.
    Idle,
    /// Sample the source and start a transmission.
    Transmit,
}

/// A deterministic threshold rule "transmit iff `S >= n`", including both
/// degenerate ends of the family.
///
/// The variants order as `Always < At(1) < At(2) < ... < Never`, which is the
/// order of decreasing update rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Threshold {
    /// Transmit in every slot (threshold 0). Transmissions at `S = 0` do not
    /// affect the dynamics but still count against the rate budget.
    Always,
    /// Transmit iff `S >= n`, with `n >= 1`.
    At(u64),
    /// Never transmit. Only meaningful for bounded penalties, where it is
    /// reported as index `S_thresh + 1`.
    Never,
}

impl Threshold {
    /// Canonical constructor from a numeric index: `0` maps to [`Threshold::Always`].
    pub fn from_index(n: u64) -> Self {
        if n == 0 {
            Threshold::Always
        } else {
            Threshold::At(n)
        }
    }

    /// Numeric index used in reports and CSV output. `Never` needs the
    /// penalty's truncation state to render as `S_thresh + 1`.
    pub fn index(&self, f: &PenaltySpec) -> u64 {
        match self {
            Threshold::Always => 0,
            Threshold::At(n) => *n,
            Threshold::Never => f
                .s_thresh()
                .expect("Never threshold only exists for bounded penalties")
                + 1,
        }
    }

    /// The threshold-n index used for chain dynamics; `Always` induces the
    /// same chain as threshold 1 because transmitting at `S = 0` is a no-op.
    pub(crate) fn dynamics_index(&self) -> Option<u64> {
        match self {
            Threshold::Always => Some(1),
            Threshold::At(n) => Some(*n),
            Threshold::Never => None,
        }
    }

    /// Next threshold in the family (decreasing rate). Saturates at `Never`
    /// for bounded penalties and is unbounded otherwise.
    pub(crate) fn successor(&self, f: &PenaltySpec) -> Threshold {
        match self {
            Threshold::Always => Threshold::At(1),
            Threshold::At(n) => match f.s_thresh() {
                Some(s) if *n >= s => Threshold::Never,
                _ => Threshold::At(n + 1),
            },
            Threshold::Never => Threshold::Never,
        }
    }

    /// Previous threshold in the family (increasing rate).
    pub(crate) fn predecessor(&self, f: &PenaltySpec) -> Threshold {
        match self {
            Threshold::Always => Threshold::Always,
            Threshold::At(1) => Threshold::Always,
            Threshold::At(n) => Threshold::At(n - 1),
            Threshold::Never => Threshold::At(
                f.s_thresh()
                    .expect("Never threshold only exists for bounded penalties"),
            ),
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Always => write!(f, "always"),
            Threshold::At(n) => write!(f, "{n}"),
            Threshold::Never => write!(f, "never"),
        }
    }
}

/// Validated source/channel parameter set.
///
/// Construction checks every range and the admissibility condition `a < beta`
/// and pre-computes the derived quantities; instances are immutable
/// afterwards, so they can be shared freely across threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceChannelParams {
    alpha: f64,
    beta: f64,
    p_s: f64,
    delta: f64,
    a: f64,
    vartheta: f64,
}

impl SourceChannelParams {
    /// Validates the raw parameters and derives `a` and `vartheta`.
    ///
    /// Ranges: `alpha` in (0,1), `beta` in (0,1], `p_s` in (0,1], `delta` in
    /// (0,1]. `beta = 1` is accepted (absorbing mismatch absent deliveries);
    /// the degenerate sources `alpha = 0` and `alpha = 1` are rejected.
    pub fn new(alpha: f64, beta: f64, p_s: f64, delta: f64) -> Result<Self> {
        check_range("alpha", alpha, 0.0, 1.0, false, false)?;
        check_range("beta", beta, 0.0, 1.0, false, true)?;
        check_range("p_s", p_s, 0.0, 1.0, false, true)?;
        check_range("delta", delta, 0.0, 1.0, false, true)?;
        let p_f = 1.0 - p_s;
        let a = p_f * beta + (1.0 - beta) * p_s;
        if a >= beta {
            return Err(Error::Admissibility { a, beta });
        }
        let vartheta = (1.0 - alpha) / (2.0 - alpha - a);
        Ok(Self {
            alpha,
            beta,
            p_s,
            delta,
            a,
            vartheta,
        })
    }

    /// Same parameters with a different rate budget.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, self.p_s, delta)
    }

    /// Self-loop probability of the in-sync regime.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Self-loop probability of the mismatch regime absent deliveries.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Channel success probability.
    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    /// Channel failure probability.
    pub fn p_f(&self) -> f64 {
        1.0 - self.p_s
    }

    /// Maximum long-run transmission frequency.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Effective persistence of a mismatch under transmission.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Update rate of the "transmit whenever S != 0" policy.
    pub fn vartheta(&self) -> f64 {
        self.vartheta
    }
}

fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
) -> Result<()> {
    let lo_ok = if lo_closed { value >= lo } else { value > lo };
    let hi_ok = if hi_closed { value <= hi } else { value < hi };
    if value.is_finite() && lo_ok && hi_ok {
        Ok(())
    } else {
        Err(Error::Range {
            name,
            value,
            range: match (lo_closed, hi_closed) {
                (false, false) => "(0,1)",
                (false, true) => "(0,1]",
                (true, false) => "[0,1)",
                (true, true) => "[0,1]",
            },
        })
    }
}

/// Exact one-step transition distribution of the mismatch age under a given
/// action. The support always has two points and the probabilities sum to 1.
///
/// At `S = 0` the distribution is the same for both actions: a delivery of an
/// already-correct estimate changes nothing.
pub fn transition_distribution(
    s: State,
    action: Action,
    params: &SourceChannelParams,
) -> [(State, f64); 2] {
    if s == 0 {
        [(0, params.alpha()), (1, 1.0 - params.alpha())]
    } else {
        let grow = match action {
            Action::Idle => params.beta(),
            Action::Transmit => params.a(),
        };
        [(s + 1, grow), (0, 1.0 - grow)]
    }
}

/// How a penalty behaves for large `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    /// `f` grows without bound; the caller asserts `sum f(k) a^k < inf`.
    Unbounded,
    /// `f` saturates at `level`; states at or beyond `s_thresh` are treated
    /// as one lumped state where `f` equals `f(s_thresh)`, which is within
    /// `epsilon` of the level.
    Bounded {
        s_thresh: u64,
        level: f64,
        epsilon: f64,
    },
}

/// A non-decreasing, non-negative dissatisfaction function over the mismatch
/// age, tagged with its tail behavior.
///
/// Bounded specs evaluate as `f(min(S, s_thresh))`, i.e. the saturated value
/// beyond the truncation state. Monotonicity and non-negativity are checked
/// at construction by scanning `0..=s_thresh` (bounded) or a probe range
/// (unbounded); the summability of unbounded tails cannot be decided for a
/// black-box callable and is asserted by the caller instead — the tail-sum
/// routine raises [`Error::DivergenceSuspected`] if terms fail to decay.
#[derive(Clone)]
pub struct PenaltySpec {
    name: String,
    f: Arc<dyn Fn(u64) -> f64 + Send + Sync>,
    kind: PenaltyKind,
}

/// Default scan length for the monotonicity check of unbounded penalties.
pub const DEFAULT_MONOTONE_PROBE: u64 = 10_000;

impl PenaltySpec {
    /// Wraps an unbounded penalty, scanning `0..=DEFAULT_MONOTONE_PROBE` for
    /// monotonicity and non-negativity.
    pub fn unbounded<F>(name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        Self::unbounded_with_probe(name, f, DEFAULT_MONOTONE_PROBE)
    }

    /// Wraps an unbounded penalty with an explicit monotonicity probe range.
    pub fn unbounded_with_probe<F>(name: impl Into<String>, f: F, probe: u64) -> Result<Self>
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        scan_shape(&f, probe)?;
        Ok(Self {
            name: name.into(),
            f: Arc::new(f),
            kind: PenaltyKind::Unbounded,
        })
    }

    /// Wraps a bounded penalty with a pinned truncation state.
    ///
    /// Requires `s_thresh >= 1`, `f` non-decreasing and non-negative on
    /// `0..=s_thresh`, and `level - f(s_thresh) < epsilon`.
    pub fn bounded<F>(
        name: impl Into<String>,
        f: F,
        s_thresh: u64,
        level: f64,
        epsilon: f64,
    ) -> Result<Self>
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        if s_thresh == 0 {
            return Err(Error::Param {
                name: "s_thresh",
                reason: "truncation state must be >= 1".into(),
            });
        }
        if !(epsilon > 0.0) {
            return Err(Error::Param {
                name: "epsilon",
                reason: format!("must be > 0, got {epsilon}"),
            });
        }
        scan_shape(&f, s_thresh)?;
        let gap = level - f(s_thresh);
        if !(gap < epsilon) {
            return Err(Error::SaturationGap {
                s_thresh,
                level,
                gap,
                epsilon,
            });
        }
        Ok(Self {
            name: name.into(),
            f: Arc::new(f),
            kind: PenaltyKind::Bounded {
                s_thresh,
                level,
                epsilon,
            },
        })
    }

    /// Wraps a bounded penalty, picking the smallest `s_thresh` with
    /// `level - f(s_thresh) < epsilon`.
    pub fn bounded_auto<F>(
        name: impl Into<String>,
        f: F,
        level: f64,
        epsilon: f64,
    ) -> Result<Self>
    where
        F: Fn(u64) -> f64 + Send + Sync + 'static,
    {
        const SCAN_CAP: u64 = 1_000_000;
        let mut s_thresh = None;
        for s in 1..=SCAN_CAP {
            if level - f(s) < epsilon {
                s_thresh = Some(s);
                break;
            }
        }
        let s_thresh = s_thresh.ok_or(Error::Param {
            name: "epsilon",
            reason: format!("no state below {SCAN_CAP} comes within {epsilon} of level {level}"),
        })?;
        Self::bounded(name, f, s_thresh, level, epsilon)
    }

    /// Penalty at mismatch age `s`, truncated at `s_thresh` for bounded specs.
    pub fn eval(&self, s: State) -> f64 {
        match self.kind {
            PenaltyKind::Unbounded => (self.f)(s),
            PenaltyKind::Bounded { s_thresh, .. } => (self.f)(s.min(s_thresh)),
        }
    }

    /// Human-readable name used in reports and CSV output.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Tail behavior tag.
    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    /// Whether the penalty saturates.
    pub fn is_bounded(&self) -> bool {
        matches!(self.kind, PenaltyKind::Bounded { .. })
    }

    /// Truncation state of a bounded penalty.
    pub fn s_thresh(&self) -> Option<u64> {
        match self.kind {
            PenaltyKind::Unbounded => None,
            PenaltyKind::Bounded { s_thresh, .. } => Some(s_thresh),
        }
    }
}

impl fmt::Debug for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PenaltySpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

fn scan_shape<F: Fn(u64) -> f64>(f: &F, upto: u64) -> Result<()> {
    let mut prev = f(0);
    if !(prev >= 0.0) {
        return Err(Error::NegativePenalty { at: 0, value: prev });
    }
    for s in 0..upto {
        let next = f(s + 1);
        if !(next >= 0.0) {
            return Err(Error::NegativePenalty {
                at: s + 1,
                value: next,
            });
        }
        if next < prev {
            return Err(Error::NonMonotonePenalty {
                at: s,
                before: prev,
                after: next,
            });
        }
        prev = next;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, beta: f64, p_s: f64) -> SourceChannelParams {
        SourceChannelParams::new(alpha, beta, p_s, 0.5).unwrap()
    }

    #[test]
    fn derives_effective_persistence_and_critical_rate() {
        let p = params(0.2, 0.9, 0.8);
        assert!((p.a() - 0.26).abs() < 1e-15);
        assert!((p.vartheta() - 0.8 / 1.54).abs() < 1e-12);
    }

    #[test]
    fn beta_one_perfect_channel_gives_a_zero() {
        let p = params(0.2, 1.0, 1.0);
        assert_eq!(p.a(), 0.0);
        assert!((p.vartheta() - 0.8 / 1.8).abs() < 1e-12);
    }

    #[test]
    fn rejects_inadmissible_pair() {
        // a = 0.9*0.4 + 0.6*0.1 = 0.42 >= beta = 0.4
        let err = SourceChannelParams::new(0.5, 0.4, 0.1, 0.5).unwrap_err();
        assert!(matches!(err, Error::Admissibility { .. }));
    }

    #[test]
    fn rejects_boundary_sources() {
        for alpha in [0.0, 1.0] {
            let err = SourceChannelParams::new(alpha, 0.9, 0.8, 0.5).unwrap_err();
            assert!(matches!(err, Error::Range { name: "alpha", .. }));
        }
        assert!(SourceChannelParams::new(0.2, 0.9, 0.8, 0.0).is_err());
        assert!(SourceChannelParams::new(0.2, 0.0, 0.8, 0.5).is_err());
        assert!(SourceChannelParams::new(0.2, 0.9, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn kernel_matches_hand_computed_rows() {
        let p = params(0.2, 0.9, 0.8);
        assert_eq!(
            transition_distribution(0, Action::Idle, &p),
            [(0, 0.2), (1, 0.8)]
        );
        // Transmission has no effect in the in-sync regime.
        assert_eq!(
            transition_distribution(0, Action::Transmit, &p),
            transition_distribution(0, Action::Idle, &p)
        );
        let [(up, grow), (zero, reset)] = transition_distribution(3, Action::Transmit, &p);
        assert_eq!((up, zero), (4, 0));
        assert!((grow - 0.26).abs() < 1e-15);
        assert!((reset - 0.74).abs() < 1e-15);
    }

    #[test]
    fn kernel_rows_sum_to_one_and_transmission_helps() {
        let p = params(0.3, 0.7, 0.6);
        for s in [0, 1, 5, 1000] {
            for action in [Action::Idle, Action::Transmit] {
                let dist = transition_distribution(s, action, &p);
                let total: f64 = dist.iter().map(|(_, pr)| pr).sum();
                assert!((total - 1.0).abs() < 1e-15);
            }
            if s > 0 {
                let reset = |a: Action| transition_distribution(s, a, &p)[1].1;
                let gain = reset(Action::Transmit) - reset(Action::Idle);
                assert!((gain - (p.beta() - p.a())).abs() < 1e-15);
                assert!(gain > 0.0);
            }
        }
    }

    #[test]
    fn bounded_penalty_truncates_and_checks_saturation() {
        let f = PenaltySpec::bounded("step", |s| if s == 0 { 0.0 } else { 1.0 }, 1, 1.0, 1e-9)
            .unwrap();
        assert_eq!(f.eval(0), 0.0);
        assert_eq!(f.eval(1), 1.0);
        assert_eq!(f.eval(100), 1.0);
        assert_eq!(f.s_thresh(), Some(1));

        let err = PenaltySpec::bounded("slow", |s| 1.0 - 0.5f64.powi(s as i32), 3, 1.0, 1e-3)
            .unwrap_err();
        assert!(matches!(err, Error::SaturationGap { .. }));
    }

    #[test]
    fn rejects_decreasing_or_negative_penalties() {
        let err = PenaltySpec::unbounded_with_probe("bad", |s| if s == 5 { 0.0 } else { s as f64 }, 100)
            .unwrap_err();
        assert!(matches!(err, Error::NonMonotonePenalty { .. }));
        let err = PenaltySpec::unbounded_with_probe("neg", |s| s as f64 - 1.0, 100).unwrap_err();
        assert!(matches!(err, Error::NegativePenalty { .. }));
    }

    #[test]
    fn threshold_ordering_and_indices() {
        let f = PenaltySpec::bounded("step", |s| (s > 0) as u64 as f64, 1, 1.0, 1e-9).unwrap();
        assert!(Threshold::Always < Threshold::At(1));
        assert!(Threshold::At(1) < Threshold::At(7));
        assert!(Threshold::At(7) < Threshold::Never);
        assert_eq!(Threshold::Never.index(&f), 2);
        assert_eq!(Threshold::At(1).successor(&f), Threshold::Never);
        assert_eq!(Threshold::Never.predecessor(&f), Threshold::At(1));
        assert_eq!(Threshold::from_index(0), Threshold::Always);
    }
}
