//! `verify`: run the oracle grid and the closed-form/simulation
//! cross-checks, print one report line per invariant with its measured
//! margin, and exit non-zero if anything fails.
//!
//! The `--inject-fault` flag perturbs one quantity inside the verification
//! path (never inside the library) as a negative control: a corrupted build
//! must turn the report red.

use rayon::prelude::*;

use aoii::closed_form::{
    average_penalty, stationary_distribution, tail_sum, theta, update_rate, value_function,
    DEFAULT_EPS_TAIL,
};
use aoii::model::Threshold;
use aoii::optimizer::{error_optimal, find_threshold, solve, SolverOptions};
use aoii::rvia::{check_monotone, check_threshold_structure, rvia, RviaOptions};
use aoii::sim::{simulate_stream, Policy};
use aoii::{apps, PenaltySpec, SourceChannelParams};

use super::CliError;
use crate::config::parse_kv;
use crate::csvfmt::{row, sig6};

/// Deliberate corruption of one verification quantity (negative control).
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Bias the closed-form average cost by 1e-3 before comparing.
    ThetaBias,
    /// Bias the closed-form update rate by 0.02 before comparing.
    RateBias,
}

/// Parameter grid for the oracle checks.
#[derive(Debug, Clone)]
pub struct VerifyGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub p_ss: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for VerifyGrid {
    fn default() -> Self {
        Self {
            alphas: vec![0.1, 0.3, 0.5],
            betas: vec![0.7, 0.9],
            p_ss: vec![0.6, 0.9],
            lambdas: vec![0.0, 0.5, 2.0, 10.0],
        }
    }
}

impl VerifyGrid {
    /// Optional override file with `*_grid` keys.
    pub fn from_config(text: &str) -> Result<Self, CliError> {
        let map = parse_kv(text).map_err(CliError::from)?;
        let mut grid = VerifyGrid::default();
        for (key, value) in &map {
            let target = match key.as_str() {
                "alpha_grid" => &mut grid.alphas,
                "beta_grid" => &mut grid.betas,
                "p_s_grid" => &mut grid.p_ss,
                "lambda_grid" => &mut grid.lambdas,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown verify key {other:?} (expected *_grid)"
                    )))
                }
            };
            let parsed: Result<Vec<f64>, _> = value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect();
            *target =
                parsed.map_err(|_| CliError::Config(format!("{key}: bad number in {value:?}")))?;
            if target.is_empty() {
                return Err(CliError::Config(format!("{key}: grid is empty")));
            }
        }
        Ok(grid)
    }

    fn cells(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &alpha in &self.alphas {
            for &beta in &self.betas {
                for &p_s in &self.p_ss {
                    out.push((alpha, beta, p_s));
                }
            }
        }
        out
    }
}

struct Check {
    name: &'static str,
    measured: f64,
    bound: f64,
    detail: String,
}

impl Check {
    fn passed(&self) -> bool {
        self.measured <= self.bound
    }
}

/// Runs every check; returns the CSV report and whether all passed.
pub fn run(grid: &VerifyGrid, seed: u64, fault: Option<Fault>) -> Result<(String, bool), CliError> {
    let theta_bias = if fault == Some(Fault::ThetaBias) { 1e-3 } else { 0.0 };
    let rate_bias = if fault == Some(Fault::RateBias) { 0.02 } else { 0.0 };

    let mut checks = Vec::new();
    checks.extend(oracle_grid_checks(grid, theta_bias)?);
    checks.push(stationary_power_iteration()?);
    checks.push(update_rate_vs_simulation(seed, rate_bias)?);
    checks.push(tail_sum_vs_direct()?);
    checks.push(beta_limit_agreement()?);
    checks.extend(mixture_checks(seed, rate_bias)?);

    let mut out = String::from("check,status,measured,bound,detail\n");
    let mut all_pass = true;
    for c in &checks {
        all_pass &= c.passed();
        out.push_str(&row(&[
            c.name.to_string(),
            if c.passed() { "pass" } else { "FAIL" }.to_string(),
            sig6(c.measured),
            sig6(c.bound),
            c.detail.clone(),
        ]));
    }
    Ok((out, all_pass))
}

fn grid_penalties() -> Vec<PenaltySpec> {
    vec![
        apps::linear_f(),
        apps::weibull_f(&apps::WeibullParams::paper(), 1e-3).expect("fixture"),
        apps::error_f(),
    ]
}

/// Oracle equivalence and structural checks over the full grid.
fn oracle_grid_checks(grid: &VerifyGrid, theta_bias: f64) -> Result<Vec<Check>, CliError> {
    let opts = SolverOptions::default();
    let penalties = grid_penalties();
    let cells = grid.cells();
    let mut tasks = Vec::new();
    for &(alpha, beta, p_s) in &cells {
        for f in &penalties {
            for &lambda in &grid.lambdas {
                tasks.push((alpha, beta, p_s, f.clone(), lambda));
            }
        }
    }

    struct CellOut {
        threshold_mismatch: bool,
        theta_err: f64,
        value_err: f64,
        monotone: bool,
        structured: bool,
    }

    let outs: Vec<CellOut> = tasks
        .par_iter()
        .map(|(alpha, beta, p_s, f, lambda)| -> Result<CellOut, CliError> {
            let params = SourceChannelParams::new(*alpha, *beta, *p_s, 0.5)?;
            let r = rvia(*lambda, &params, f, &RviaOptions::default())?;
            let expected = find_threshold(*lambda, &params, f, &opts)?;
            let got = r.threshold_estimate();

            let theta_cf = match expected {
                Threshold::Always => theta(1, *lambda, &params, f, opts.eps_tail)?,
                Threshold::At(n) => theta(n, *lambda, &params, f, opts.eps_tail)?,
                Threshold::Never => average_penalty(Threshold::Never, &params, f, opts.eps_tail)?,
            } + theta_bias;

            let k = r.v.len() - 1;
            let v_threshold = match expected {
                Threshold::Always => Threshold::At(1),
                other => other,
            };
            let mut value_err = 0.0f64;
            for s in 0..=(k / 2) as u64 {
                let cf = value_function(s, v_threshold, *lambda, &params, f, opts.eps_tail)?;
                let diff = (cf - r.v[s as usize]).abs();
                if diff > value_err {
                    value_err = diff;
                }
            }

            Ok(CellOut {
                threshold_mismatch: got != expected,
                theta_err: (theta_cf - r.theta_est).abs(),
                value_err,
                monotone: check_monotone(&r),
                structured: check_threshold_structure(&r),
            })
        })
        .collect::<Result<_, _>>()?;

    let cells_total = outs.len();
    let mismatches = outs.iter().filter(|o| o.threshold_mismatch).count();
    let theta_err = outs.iter().map(|o| o.theta_err).fold(0.0, f64::max);
    let value_err = outs.iter().map(|o| o.value_err).fold(0.0, f64::max);
    let non_monotone = outs.iter().filter(|o| !o.monotone).count();
    let unstructured = outs.iter().filter(|o| !o.structured).count();

    Ok(vec![
        Check {
            name: "oracle_threshold_equality",
            measured: mismatches as f64,
            bound: 0.0,
            detail: format!("threshold mismatches over {cells_total} cells"),
        },
        Check {
            name: "oracle_theta_agreement",
            measured: theta_err,
            bound: 1e-4,
            detail: format!("max |theta_closed - theta_dp| over {cells_total} cells"),
        },
        Check {
            name: "oracle_value_agreement",
            measured: value_err,
            bound: 1e-3,
            detail: format!("max sup-norm value gap on S <= K/2 over {cells_total} cells"),
        },
        Check {
            name: "value_monotone",
            measured: non_monotone as f64,
            bound: 0.0,
            detail: format!("non-monotone value functions over {cells_total} cells"),
        },
        Check {
            name: "threshold_structure",
            measured: unstructured as f64,
            bound: 0.0,
            detail: format!("non-threshold greedy policies over {cells_total} cells"),
        },
    ])
}

/// Closed-form stationary distribution against plain power iteration of the
/// truncated kernel.
fn stationary_power_iteration() -> Result<Check, CliError> {
    let params = SourceChannelParams::new(0.2, 0.9, 0.8, 0.5)?;
    let f = apps::linear_f();
    let k = 200usize;
    let mut worst = 0.0f64;
    for n in [1u64, 2, 5, 12] {
        let closed = stationary_distribution(Threshold::At(n), &params, &f, k as u64)?;
        let iterated = power_iteration(n, &params, k);
        for s in 0..=k {
            let diff = (closed.prob(s as u64) - iterated[s]).abs();
            if diff > worst {
                worst = diff;
            }
        }
    }
    Ok(Check {
        name: "stationary_power_iteration",
        measured: worst,
        bound: 1e-9,
        detail: "sup-norm vs K=200 power iteration at n in {1,2,5,12}".to_string(),
    })
}

fn power_iteration(n: u64, params: &SourceChannelParams, k: usize) -> Vec<f64> {
    let alpha = params.alpha();
    let beta = params.beta();
    let a = params.a();
    let mut x = vec![0.0f64; k + 1];
    x[0] = 1.0;
    let mut y = vec![0.0f64; k + 1];
    for _ in 0..2_000_000 {
        y.iter_mut().for_each(|v| *v = 0.0);
        y[0] += x[0] * alpha;
        y[1] += x[0] * (1.0 - alpha);
        for s in 1..=k {
            let grow = if (s as u64) >= n { a } else { beta };
            y[(s + 1).min(k)] += x[s] * grow;
            y[0] += x[s] * (1.0 - grow);
        }
        let delta = x
            .iter()
            .zip(&y)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut y);
        if delta <= 1e-13 {
            break;
        }
    }
    x
}

/// Closed-form update rate against seeded simulation for n = 0..15.
fn update_rate_vs_simulation(seed: u64, rate_bias: f64) -> Result<Check, CliError> {
    let params = SourceChannelParams::new(0.2, 0.9, 0.8, 0.5)?;
    let f = apps::linear_f();
    let worst = (0u64..=15)
        .into_par_iter()
        .map(|n| {
            let t = Threshold::from_index(n);
            let st = simulate_stream(&Policy::Threshold(t), &params, &f, 1_000_000, seed, n);
            (st.rate - (update_rate(t, &params) + rate_bias)).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(Check {
        name: "update_rate_simulation",
        measured: worst,
        bound: 5e-3,
        detail: "max |sim - closed| rate, n = 0..15, T = 1e6".to_string(),
    })
}

/// Guarded tail sum against direct high-precision summation.
fn tail_sum_vs_direct() -> Result<Check, CliError> {
    let f = apps::video_f(&apps::VideoParams::paper())?;
    let mut worst = 0.0f64;
    for i in 1..=9 {
        let a = i as f64 / 10.0;
        for n in [0u64, 3] {
            let guarded = tail_sum(&f, a, n, DEFAULT_EPS_TAIL).map_err(CliError::from)?;
            // Kahan-compensated direct sum over 1e4 terms.
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            let mut pow = 1.0f64;
            for k in n..n + 10_000 {
                let term = f.eval(k) * pow - comp;
                let t = sum + term;
                comp = (t - sum) - term;
                sum = t;
                pow *= a;
            }
            let rel = (guarded - sum).abs() / sum;
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(Check {
        name: "tail_sum_direct",
        measured: worst,
        bound: 1e-9,
        detail: "max relative gap vs 1e4-term direct sum, video penalty".to_string(),
    })
}

/// Exact beta = 1 algebra against beta = 1 - 1e-9 generic evaluation.
fn beta_limit_agreement() -> Result<Check, CliError> {
    let exact = SourceChannelParams::new(0.2, 1.0, 1.0, 0.3)?;
    let near = SourceChannelParams::new(0.2, 1.0 - 1e-9, 1.0, 0.3)?;
    let f = apps::fire_f(&apps::FireParams::paper())?;
    let mut worst = 0.0f64;
    for n in [1u64, 5, 12, 24] {
        let c0 = update_rate(Threshold::At(n), &exact);
        let c1 = update_rate(Threshold::At(n), &near);
        worst = worst.max((c0 - c1).abs() / c0);
        for lambda in [0.0, 1.0, 4.0] {
            let t0 = theta(n, lambda, &exact, &f, DEFAULT_EPS_TAIL)?;
            let t1 = theta(n, lambda, &near, &f, DEFAULT_EPS_TAIL)?;
            worst = worst.max((t0 - t1).abs() / t0.abs().max(1.0));
        }
    }
    Ok(Check {
        name: "beta_limit_agreement",
        measured: worst,
        bound: 1e-6,
        detail: "max relative gap, beta = 1 vs 1 - 1e-9, fire penalty".to_string(),
    })
}

/// Budget bracketing, rate realization, and error-optimality of the
/// penalty-optimal solution.
fn mixture_checks(seed: u64, rate_bias: f64) -> Result<Vec<Check>, CliError> {
    let opts = SolverOptions::default();
    let f = apps::linear_f();
    let deltas = [0.05, 0.1, 0.2, 0.4];

    let mut bracket_violation = 0.0f64;
    let mut rate_gap = 0.0f64;
    let mut err_gap = 0.0f64;
    let sims: Vec<(f64, Policy, SourceChannelParams)> = deltas
        .iter()
        .map(|&delta| -> Result<_, CliError> {
            let params = SourceChannelParams::new(0.2, 0.9, 0.8, delta)?;
            let sol = solve(&params, &f, &opts)?;
            bracket_violation = bracket_violation
                .max(delta - sol.policy.c_low)
                .max(sol.policy.c_high - delta);
            rate_gap = rate_gap.max((sol.achieved_rate - delta).abs());
            let err_sol = error_optimal(&params, &opts)?;
            err_gap = err_gap.max((sol.avg_error - err_sol.avg_error).abs());
            Ok((delta, sol.policy.to_sim_policy(&f), params))
        })
        .collect::<Result<_, _>>()?;

    let sim_rate_gap = sims
        .par_iter()
        .enumerate()
        .map(|(i, (delta, policy, params))| {
            let st = simulate_stream(policy, params, &f, 1_000_000, seed, 100 + i as u64);
            (st.rate - delta + rate_bias).abs()
        })
        .reduce(|| 0.0, f64::max);

    Ok(vec![
        Check {
            name: "mixture_bracket",
            measured: bracket_violation.max(rate_gap),
            bound: 1e-9,
            detail: "C(n_low) >= delta >= C(n_high) and convex rate = delta".to_string(),
        },
        Check {
            name: "mixture_sim_rate",
            measured: sim_rate_gap,
            bound: 5e-3,
            detail: "max |sim rate - delta| of realized mixtures, T = 1e6".to_string(),
        },
        Check {
            name: "aoii_error_optimality",
            measured: err_gap,
            bound: 1e-2,
            detail: "max |err(penalty-optimal) - err(error-optimal)|".to_string(),
        },
    ])
}
