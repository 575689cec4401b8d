//! `reproduce`: run the built-in comparison scenarios and emit their CSV.
//!
//! `table2` pits the penalty-optimal policy against the error-optimal one on
//! the linear penalty for three budgets. The `fig6*` targets sweep a
//! nine-point budget grid and score every competing policy on the scenario's
//! application penalty, analytically (stationary average of the executed
//! chain) and by seeded simulation.

use rayon::prelude::*;

use aoii::closed_form::DEFAULT_EPS_TAIL;
use aoii::optimizer::{error_optimal, solve, SolverOptions};
use aoii::sim::{aoi_baseline, simulate_stream, SimStats};
use aoii::{apps, PenaltySpec, SourceChannelParams};

use super::{realized_analytic, CliError};
use crate::config::Mode;
use crate::csvfmt::{row, sig6};
use crate::fixtures::{self, Scenario};

/// Reproduction target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Table2,
    Fig6a,
    Fig6b,
    Fig6c,
}

/// Runtime knobs shared by all targets.
pub struct ReproduceArgs {
    pub mode: Mode,
    pub slots: u64,
    pub seed: u64,
}

impl Default for ReproduceArgs {
    fn default() -> Self {
        Self {
            mode: Mode::Analytic,
            slots: 1_000_000,
            seed: 0,
        }
    }
}

pub fn run(target: Target, args: &ReproduceArgs) -> Result<String, CliError> {
    match target {
        Target::Table2 => run_table2(args),
        Target::Fig6a => run_fig6(&fixtures::fig6a(), args),
        Target::Fig6b => run_fig6(&fixtures::fig6b(), args),
        Target::Fig6c => run_fig6(&fixtures::fig6c(), args),
    }
}

fn run_table2(args: &ReproduceArgs) -> Result<String, CliError> {
    let sc = fixtures::table2();
    let opts = SolverOptions::default();
    let with_sim = args.mode != Mode::Analytic;
    let mut out = String::from("delta,policy,avg_aoii,avg_error,threshold");
    if with_sim {
        out.push_str(",sim_aoii,sim_error,sim_rate");
    }
    out.push('\n');

    let rows: Vec<String> = fixtures::TABLE2_DELTAS
        .par_iter()
        .enumerate()
        .map(|(cell, &delta)| -> Result<String, CliError> {
            let params = SourceChannelParams::new(sc.alpha, sc.beta, sc.p_s, delta)?;
            let f = &sc.penalty;
            let f_err = apps::error_f();

            let aoii_sol = solve(&params, f, &opts)?;
            let err_sol = error_optimal(&params, &opts)?;
            // Cross-metric: penalty-average of the executed error-optimal chain.
            let err_aoii = realized_analytic(&err_sol, &params, &f_err, f, DEFAULT_EPS_TAIL)?;

            let mut lines = String::new();
            for (label, sol, aoii_value, f_model) in [
                ("aoii_opt", &aoii_sol, aoii_sol.avg_aoii, f),
                ("error_opt", &err_sol, err_aoii, &f_err),
            ] {
                let mut fields = vec![
                    sig6(delta),
                    label.to_string(),
                    sig6(aoii_value),
                    sig6(sol.avg_error),
                    sol.reported_threshold(f_model).to_string(),
                ];
                if with_sim {
                    // Same stream for both policies of one budget: common
                    // random numbers keep the comparison tight.
                    let policy = sol.policy.to_sim_policy(f_model);
                    let st =
                        simulate_stream(&policy, &params, f, args.slots, args.seed, cell as u64);
                    fields.extend([sig6(st.avg_penalty), sig6(st.avg_error), sig6(st.rate)]);
                }
                lines.push_str(&row(&fields));
            }
            Ok(lines)
        })
        .collect::<Result<_, _>>()?;
    out.push_str(&rows.concat());
    Ok(out)
}

struct Fig6Cell {
    delta: f64,
    policy: &'static str,
    analytic: Option<f64>,
    sim: Option<SimStats>,
}

fn run_fig6(sc: &Scenario, args: &ReproduceArgs) -> Result<String, CliError> {
    let opts = SolverOptions::default();
    let grid = fixtures::default_delta_grid();
    let f = &sc.penalty;
    let f_err = apps::error_f();
    let with_sim = args.mode != Mode::Analytic;

    let mut tasks: Vec<(u64, f64, &'static str)> = Vec::new();
    for (idx, &delta) in grid.iter().enumerate() {
        tasks.push((idx as u64, delta, "aoii_opt"));
        tasks.push((idx as u64, delta, "error_opt"));
        if sc.with_aoi_baseline {
            tasks.push((idx as u64, delta, "aoi_opt"));
        }
    }

    let cells: Vec<Fig6Cell> = tasks
        .par_iter()
        .map(|&(stream, delta, label)| -> Result<Fig6Cell, CliError> {
            let params = SourceChannelParams::new(sc.alpha, sc.beta, sc.p_s, delta)?;
            let (policy, analytic) = match label {
                "aoii_opt" => {
                    let sol = solve(&params, f, &opts)?;
                    let analytic = realized_analytic(&sol, &params, f, f, DEFAULT_EPS_TAIL)?;
                    (sol.policy.to_sim_policy(f), Some(analytic))
                }
                "error_opt" => {
                    let sol = error_optimal(&params, &opts)?;
                    let analytic = realized_analytic(&sol, &params, &f_err, f, DEFAULT_EPS_TAIL)?;
                    (sol.policy.to_sim_policy(&f_err), Some(analytic))
                }
                _ => (aoi_baseline(&params)?, None),
            };
            // One stream per budget across all policies (common random
            // numbers), so the comparison columns share the sample path.
            let sim = with_sim
                .then(|| simulate_stream(&policy, &params, f, args.slots, args.seed, stream));
            Ok(Fig6Cell {
                delta,
                policy: label,
                analytic,
                sim,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut out = String::from("delta,policy,penalty_analytic,penalty_sim,penalty_hw,rate_sim\n");
    for c in &cells {
        let (p_sim, p_hw, r_sim) = match &c.sim {
            Some(st) => (sig6(st.avg_penalty), sig6(st.hw_penalty), sig6(st.rate)),
            None => (String::new(), String::new(), String::new()),
        };
        out.push_str(&row(&[
            sig6(c.delta),
            c.policy.to_string(),
            c.analytic.map(sig6).unwrap_or_default(),
            p_sim,
            p_hw,
            r_sim,
        ]));
    }
    Ok(out)
}

/// Resolved-parameter echo for the sidecar file.
pub fn resolved_text(target: Target, args: &ReproduceArgs) -> String {
    let sc = match target {
        Target::Table2 => fixtures::table2(),
        Target::Fig6a => fixtures::fig6a(),
        Target::Fig6b => fixtures::fig6b(),
        Target::Fig6c => fixtures::fig6c(),
    };
    let deltas = match target {
        Target::Table2 => fixtures::TABLE2_DELTAS.to_vec(),
        _ => fixtures::default_delta_grid(),
    };
    let mut out = String::new();
    out.push_str(&format!("target={}\n", sc.name));
    out.push_str(&format!("alpha={}\n", sc.alpha));
    out.push_str(&format!("beta={}\n", sc.beta));
    out.push_str(&format!("p_s={}\n", sc.p_s));
    out.push_str(&format!("penalty={}\n", penalty_name(&sc.penalty)));
    out.push_str(&format!(
        "delta_grid={}\n",
        deltas
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    out.push_str(&format!("aoi_baseline={}\n", sc.with_aoi_baseline));
    out.push_str(&format!("mode={}\n", args.mode));
    out.push_str(&format!("slots={}\n", args.slots));
    out.push_str(&format!("seed={}\n", args.seed));
    out
}

fn penalty_name(f: &PenaltySpec) -> String {
    f.name().to_string()
}
