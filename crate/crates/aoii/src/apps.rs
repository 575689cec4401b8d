//! Catalog of application penalty functions.
//!
//! Each constructor validates its parameters, fixes `f(0) = 0`, and returns a
//! [`PenaltySpec`] that already passed the monotonicity scan. The catalog
//! covers cubic video distortion under loss concealment (unbounded), a
//! Weibull breakdown probability for overheating machinery (bounded at 1),
//! exponential-growth fire damage saturating at a maximum (bounded, exact
//! saturation), and the elementary linear, indicator and time-threshold
//! penalties.

use crate::model::PenaltySpec;
use crate::{Error, Result};

/// Video-distortion parameters: initial error power `gamma`, stream
/// parameters `alpha0` and `c`, cross-correlation `rho` between successive
/// errors. `tau = 1 + alpha0 * rho + c` is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoParams {
    pub gamma: f64,
    pub alpha0: f64,
    pub rho: f64,
    pub c: f64,
}

impl VideoParams {
    /// Reference configuration used by the built-in comparison scenarios.
    pub fn paper() -> Self {
        Self {
            gamma: 1.0,
            alpha0: 4.0,
            rho: 0.8,
            c: 2.0,
        }
    }

    /// Derived aggregate `tau = 1 + alpha0 * rho + c`.
    pub fn tau(&self) -> f64 {
        1.0 + self.alpha0 * self.rho + self.c
    }
}

/// Cumulative video distortion of a loss burst of length `S` under
/// previous-frame concealment with geometric error attenuation:
///
/// ```text
/// f(S) = gamma S (alpha0 + (S-1)(tau + rho(S-1) + c rho(S-2))),   f(0) = 0
/// ```
///
/// Cubic growth, so the geometric tail sums always converge. The `(S-2)`
/// factor at `S = 1` sits inside a term multiplied by `(S-1) = 0`, so the
/// formula is implemented literally with no clamping.
pub fn video_f(p: &VideoParams) -> Result<PenaltySpec> {
    for (name, v) in [
        ("gamma", p.gamma),
        ("alpha0", p.alpha0),
        ("rho", p.rho),
        ("c", p.c),
    ] {
        positive(name, v)?;
    }
    let (gamma, alpha0, rho, c) = (p.gamma, p.alpha0, p.rho, p.c);
    let tau = p.tau();
    PenaltySpec::unbounded("video", move |s| {
        if s == 0 {
            return 0.0;
        }
        let s = s as f64;
        gamma * s * (alpha0 + (s - 1.0) * (tau + rho * (s - 1.0) + c * rho * (s - 2.0)))
    })
}

/// Weibull breakdown-time parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullParams {
    pub gamma: f64,
    pub rho: f64,
}

impl WeibullParams {
    /// Reference configuration used by the built-in comparison scenarios.
    pub fn paper() -> Self {
        Self {
            gamma: 1.0,
            rho: 1.0,
        }
    }
}

/// Probability that thermal stress applied for `S` slots has broken the
/// insulation: `f(S) = 1 - exp(-(S/gamma)^rho)`, saturating at 1.
///
/// The truncation state is the smallest `S` with `1 - f(S) < eps`.
pub fn weibull_f(p: &WeibullParams, eps: f64) -> Result<PenaltySpec> {
    positive("gamma", p.gamma)?;
    positive("rho", p.rho)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Param {
            name: "eps",
            reason: format!("must be in (0,1), got {eps}"),
        });
    }
    let (gamma, rho) = (p.gamma, p.rho);
    PenaltySpec::bounded_auto(
        "weibull",
        move |s| {
            if s == 0 {
                0.0
            } else {
                1.0 - (-(s as f64 / gamma).powf(rho)).exp()
            }
        },
        1.0,
        eps,
    )
}

/// Fire-damage parameters: maximum damage, damage at ignition, growth rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FireParams {
    pub f_max: f64,
    pub f_init: f64,
    pub gamma: f64,
}

impl FireParams {
    /// Reference configuration used by the built-in comparison scenarios.
    pub fn paper() -> Self {
        Self {
            f_max: 10.0,
            f_init: 1.0,
            gamma: 0.1,
        }
    }
}

/// Fire damage after burning for `S` slots:
/// `f(S) = min(F_max, F_init exp(gamma S))` with `f(0) = 0`.
///
/// The min makes the saturation exact, so the truncation state
/// `ceil(ln(F_max/F_init)/gamma)` carries no approximation at all.
pub fn fire_f(p: &FireParams) -> Result<PenaltySpec> {
    positive("f_init", p.f_init)?;
    positive("gamma", p.gamma)?;
    if !(p.f_max >= p.f_init) {
        return Err(Error::Param {
            name: "f_max",
            reason: format!("must be >= f_init = {}, got {}", p.f_init, p.f_max),
        });
    }
    let (f_max, f_init, gamma) = (p.f_max, p.f_init, p.gamma);
    let s_thresh = ((f_max / f_init).ln() / gamma).ceil().max(1.0) as u64;
    PenaltySpec::bounded(
        "fire",
        move |s| {
            if s == 0 {
                0.0
            } else {
                f_max.min(f_init * (gamma * s as f64).exp())
            }
        },
        s_thresh,
        f_max,
        f64::EPSILON * f_max.max(1.0),
    )
}

/// Linear dissatisfaction `f(S) = S`.
pub fn linear_f() -> PenaltySpec {
    PenaltySpec::unbounded("linear", |s| s as f64).expect("linear penalty is well-formed")
}

/// Mismatch indicator `f(0) = 0`, `f(S >= 1) = 1`; minimizing it minimizes
/// the long-run error probability.
pub fn error_f() -> PenaltySpec {
    PenaltySpec::bounded("error", |s| (s > 0) as u64 as f64, 1, 1.0, 1e-9)
        .expect("indicator penalty is well-formed")
}

/// Time-threshold dissatisfaction `f(S) = 1{S >= zeta}`: mismatches shorter
/// than `zeta` are free, longer ones cost 1 per slot.
pub fn time_threshold_f(zeta: f64) -> Result<PenaltySpec> {
    positive("zeta", zeta)?;
    let s_thresh = zeta.ceil().max(1.0) as u64;
    PenaltySpec::bounded(
        "time_threshold",
        move |s| (s as f64 >= zeta) as u64 as f64,
        s_thresh,
        1.0,
        1e-9,
    )
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Param {
            name,
            reason: format!("must be positive and finite, got {v}"),
        })
    }
}
