//! `optimize`, `simulate` and `sweep`: solve (and optionally run) the
//! configured scenario over its budget grid, one CSV row per budget.

use rayon::prelude::*;

use aoii::optimizer::solve;
use aoii::sim::simulate_stream;

use super::CliError;
use crate::config::{ExperimentConfig, Mode};
use crate::csvfmt::{row, sig6};

pub const ANALYTIC_HEADER: &str =
    "alpha,beta,p_s,delta,penalty,lambda_star,n_low,n_high,mu,q_boundary,avg_aoii,avg_error,rate";
const SIM_HEADER_TAIL: &str =
    ",sim_penalty,sim_error,sim_rate,hw_penalty,hw_error,hw_rate,slots,seed";

/// Analytic solution per budget: the 13-column schema.
pub fn run_optimize(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let rows = grid_rows(cfg, false)?;
    Ok(format!("{ANALYTIC_HEADER}\n{}", rows.concat()))
}

/// Solve + Monte-Carlo per budget: analytic columns plus simulation columns.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let rows = grid_rows(cfg, true)?;
    Ok(format!("{ANALYTIC_HEADER}{SIM_HEADER_TAIL}\n{}", rows.concat()))
}

/// Budget sweep honoring the configured mode: analytic-only columns for
/// `analytic`, the full schema otherwise.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<String, CliError> {
    match cfg.mode {
        Mode::Analytic => run_optimize(cfg),
        Mode::Simulate | Mode::Both => run_simulate(cfg),
    }
}

fn grid_rows(cfg: &ExperimentConfig, with_sim: bool) -> Result<Vec<String>, CliError> {
    let f = cfg.penalty.build()?;
    let opts = cfg.solver_options();
    cfg.deltas
        .par_iter()
        .enumerate()
        .map(|(cell, &delta)| {
            let params = cfg.params(delta)?;
            let sol = solve(&params, &f, &opts)?;
            let mut fields = vec![
                sig6(cfg.alpha),
                sig6(cfg.beta),
                sig6(cfg.p_s),
                sig6(delta),
                f.name().to_string(),
                sig6(sol.lambda_star),
                sol.policy.n_low.index(&f).to_string(),
                sol.policy.n_high.index(&f).to_string(),
                sig6(sol.policy.mu),
                sig6(sol.policy.q_boundary),
                sig6(sol.avg_aoii),
                sig6(sol.avg_error),
                sig6(sol.achieved_rate),
            ];
            if with_sim {
                let policy = sol.policy.to_sim_policy(&f);
                let st = simulate_stream(&policy, &params, &f, cfg.slots, cfg.seed, cell as u64);
                fields.extend([
                    sig6(st.avg_penalty),
                    sig6(st.avg_error),
                    sig6(st.rate),
                    sig6(st.hw_penalty),
                    sig6(st.hw_error),
                    sig6(st.hw_rate),
                    st.slots.to_string(),
                    st.seed.to_string(),
                ]);
            }
            Ok(row(&fields))
        })
        .collect()
}
