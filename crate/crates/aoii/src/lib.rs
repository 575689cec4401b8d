//! Transmission scheduling that minimizes the *age of incorrect information*
//! (AoII) for a transmitter/receiver pair over an unreliable channel, subject
//! to a long-run update-rate budget.
//!
//! The system state `S` counts consecutive slots in which the receiver's
//! estimate of a two-regime Markov source is wrong (`S = 0` means in sync).
//! A penalty `f(S)` accrues every slot, where `f` is any non-decreasing
//! dissatisfaction function. The transmitter may send at most a fraction
//! `delta` of slots; sending helps only probabilistically because the channel
//! errors and the source keeps moving while a packet is in flight.
//!
//! The crate provides, end to end:
//!
//! - [`model`] — the validated source/channel parameter set and the exact
//!   one-step transition kernel of `S`;
//! - [`closed_form`] — the threshold-policy algebra: long-run Lagrangian cost
//!   `theta_n`, the activity margin `H(n)` whose sign change locates the
//!   optimal threshold, differential value functions, update rates and
//!   stationary distributions of the induced birth-death chain, all with
//!   exact limit handling for `beta = 1` and `a = 0`;
//! - [`optimizer`] — threshold search for a fixed Lagrange multiplier,
//!   bisection on the multiplier, and the randomized two-threshold mixture
//!   that meets the rate budget with equality;
//! - [`rvia`] — an independent relative-value-iteration oracle used to verify
//!   the closed forms and the structural properties they rely on;
//! - [`sim`] — a seeded Monte-Carlo evaluator for arbitrary policies on the
//!   exact kernel, plus a rate-constrained age-threshold baseline policy that
//!   optimizes classic information age instead of AoII;
//! - [`apps`] — a catalog of application penalty functions (video distortion,
//!   Weibull overheating, saturating fire damage, indicators).

pub mod apps;
pub mod closed_form;
pub mod model;
pub mod optimizer;
pub mod rvia;
pub mod sim;

pub use closed_form::{StationaryDistribution, ThresholdEval};
pub use model::{Action, PenaltyKind, PenaltySpec, SourceChannelParams, State, Threshold};
pub use optimizer::{LagrangeSolution, MixturePolicy, SolverOptions};
pub use rvia::{RviaOptions, RviaResult};
pub use sim::{Policy, SimStats};

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A raw parameter is outside its admissible range.
    #[error("{name} = {value} is outside the admissible range {range}")]
    Range {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    /// Transmission does not improve the reset probability (`a >= beta`):
    /// the source moves so fast that updates are obsolete on arrival.
    #[error("inadmissible source/channel pair: a = {a} >= beta = {beta}, transmission never helps")]
    Admissibility { a: f64, beta: f64 },

    /// A penalty function decreased somewhere on the probed range.
    #[error("penalty is not non-decreasing: f({at}) = {before} > f({}) = {after}", at + 1)]
    NonMonotonePenalty { at: u64, before: f64, after: f64 },

    /// A penalty function went negative.
    #[error("penalty f({at}) = {value} is negative")]
    NegativePenalty { at: u64, value: f64 },

    /// A bounded penalty does not reach its saturation level at the declared
    /// truncation state.
    #[error("saturation gap at S_thresh = {s_thresh}: level {level} - f = {gap} is not < {epsilon}")]
    SaturationGap {
        s_thresh: u64,
        level: f64,
        gap: f64,
        epsilon: f64,
    },

    /// The tail series `sum f(k) a^k` failed to decay; the penalty likely
    /// violates the summability requirement.
    #[error("tail series failed to decay after {terms} terms; f may not satisfy sum f(k) a^k < inf")]
    DivergenceSuspected { terms: u64 },

    /// Interval doubling in the threshold search exceeded the hard cap.
    #[error("threshold search doubled past the cap {cap}; multiplier is effectively infinite for this penalty")]
    SearchOverflow { cap: u64 },

    /// The multiplier bisection could not bracket the rate budget.
    #[error("bisection could not bracket the rate budget delta = {delta}")]
    InfeasibleTolerance { delta: f64 },

    /// Value iteration ran out of sweeps.
    #[error("value iteration did not converge after {max_iter} sweeps (residual {residual})")]
    NoConvergence { max_iter: u64, residual: f64 },

    /// The never-transmit chain with `beta = 1` is absorbing and has no
    /// stationary distribution over an unbounded state space.
    #[error("never-transmit chain with beta = 1 is absorbing; no stationary distribution exists")]
    AbsorbingChain,

    /// An application- or configuration-level parameter is invalid.
    #[error("invalid parameter {name}: {reason}")]
    Param { name: &'static str, reason: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
