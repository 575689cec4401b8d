//! Command implementations. Each returns the CSV text it produced; `main`
//! handles file placement, the sidecar echo, and exit codes.

pub mod optimize;
pub mod reproduce;
pub mod verify;

use std::fmt;

use aoii::closed_form::average_penalty;
use aoii::optimizer::boundary_policy_average;
use aoii::{LagrangeSolution, PenaltySpec, SourceChannelParams};

/// CLI-level failure with its exit code: 1 configuration/validation,
/// 2 numerical failure, 3 verification failure.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(aoii::Error),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(e) => match e {
                aoii::Error::Range { .. }
                | aoii::Error::Admissibility { .. }
                | aoii::Error::NonMonotonePenalty { .. }
                | aoii::Error::NegativePenalty { .. }
                | aoii::Error::SaturationGap { .. }
                | aoii::Error::Param { .. } => 1,
                aoii::Error::DivergenceSuspected { .. }
                | aoii::Error::SearchOverflow { .. }
                | aoii::Error::InfeasibleTolerance { .. }
                | aoii::Error::NoConvergence { .. }
                | aoii::Error::AbsorbingChain => 2,
            },
            CliError::Verification(_) => 3,
        }
    }

    /// One machine-readable stderr line: `error,<code>,<message>`.
    pub fn machine_line(&self) -> String {
        format!("error,{},{}", self.exit_code(), self)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Numeric(e) => write!(f, "{e}"),
            CliError::Verification(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<aoii::Error> for CliError {
    fn from(e: aoii::Error) -> Self {
        CliError::Numeric(e)
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

/// Stationary average of `f_score` under the executable realization of a
/// solution's policy — the value a long simulated trajectory converges to.
/// For the policy's own objective this coincides with the solution's convex
/// analytic value; for cross-metric scoring it is the honest counterpart of
/// the simulation column.
pub fn realized_analytic(
    sol: &LagrangeSolution,
    params: &SourceChannelParams,
    f_model: &PenaltySpec,
    f_score: &PenaltySpec,
    eps_tail: f64,
) -> Result<f64, aoii::Error> {
    if sol.policy.is_pure() {
        average_penalty(sol.policy.n_high, params, f_score, eps_tail)
    } else {
        boundary_policy_average(
            sol.policy.n_high,
            sol.policy.q_boundary,
            params,
            f_model,
            f_score,
            eps_tail,
        )
    }
}
