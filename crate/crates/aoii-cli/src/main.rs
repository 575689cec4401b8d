//! Batch experiment driver for rate-constrained AoII transmission policies.
//!
//! Subcommands: `optimize`, `simulate`, `sweep` (configured scenarios),
//! `reproduce` (built-in comparison scenarios), `verify` (oracle and
//! property gate). Output is CSV on stdout or `--out`; every run echoes its
//! fully resolved configuration to a sidecar file. Exit codes: 0 success,
//! 1 configuration/validation error, 2 numerical failure, 3 verification
//! failure.

mod config;
mod csvfmt;
mod fixtures;
mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::reproduce::{ReproduceArgs, Target};
use commands::verify::{Fault, VerifyGrid};
use commands::CliError;
use config::Mode;

#[derive(Parser)]
#[command(name = "aoii", version, about = "Rate-constrained AoII transmission policies: optimize, simulate, verify")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Worker threads for grid cells (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation horizon override (slots).
    #[arg(long)]
    slots: Option<u64>,
    /// Output mode override.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the configured scenario analytically, one CSV row per budget.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve and Monte-Carlo-evaluate the configured scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep the configured budget grid, honoring the configured mode.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a built-in comparison scenario.
    Reproduce {
        #[arg(value_enum)]
        target: Target,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the oracle grid and property checks; exit 3 on any failure.
    Verify {
        /// Optional grid override file (`alpha_grid=`, `beta_grid=`,
        /// `p_s_grid=`, `lambda_grid=`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Corrupt one verification quantity as a negative control.
        #[arg(long, value_enum)]
        inject_fault: Option<Fault>,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore failure when a pool already exists (tests call main twice).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{}", err.machine_line());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode, CliError> {
    match cmd {
        Cmd::Optimize { config, run } => {
            let cfg = experiment(&config, &run)?;
            let csv = commands::optimize::run_optimize(&cfg)?;
            emit(&run.out, &csv, "optimize", &cfg.resolved_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Simulate { config, run } => {
            let cfg = experiment(&config, &run)?;
            let csv = commands::optimize::run_simulate(&cfg)?;
            emit(&run.out, &csv, "simulate", &cfg.resolved_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sweep { config, run } => {
            let cfg = experiment(&config, &run)?;
            let csv = commands::optimize::run_sweep(&cfg)?;
            emit(&run.out, &csv, "sweep", &cfg.resolved_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Reproduce { target, run } => {
            let mut args = ReproduceArgs::default();
            if matches!(target, Target::Fig6a | Target::Fig6b | Target::Fig6c) {
                args.mode = Mode::Both;
            }
            if let Some(mode) = run.mode {
                args.mode = mode;
            }
            if let Some(slots) = run.slots {
                args.slots = slots;
            }
            if let Some(seed) = run.seed {
                args.seed = seed;
            }
            let csv = commands::reproduce::run(target, &args)?;
            let resolved = commands::reproduce::resolved_text(target, &args);
            emit(&run.out, &csv, "reproduce", &resolved)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify {
            config,
            inject_fault,
            run,
        } => {
            let grid = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        CliError::Config(format!("cannot read {}: {e}", path.display()))
                    })?;
                    VerifyGrid::from_config(&text)?
                }
                None => VerifyGrid::default(),
            };
            let seed = run.seed.unwrap_or(0);
            let (report, all_pass) = commands::verify::run(&grid, seed, inject_fault)?;
            let resolved = format!(
                "alpha_grid={}\nbeta_grid={}\np_s_grid={}\nlambda_grid={}\nseed={seed}\ninject_fault={}\n",
                join(&grid.alphas),
                join(&grid.betas),
                join(&grid.p_ss),
                join(&grid.lambdas),
                inject_fault.map_or("none".to_string(), |f| format!("{f:?}")),
            );
            emit(&run.out, &report, "verify", &resolved)?;
            if all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Err(CliError::Verification(
                    "one or more checks failed; see report".to_string(),
                ))
            }
        }
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn experiment(path: &Path, run: &RunArgs) -> Result<config::ExperimentConfig, CliError> {
    let mut cfg = config::load_experiment(path)?;
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    if let Some(slots) = run.slots {
        cfg.slots = slots;
    }
    if let Some(mode) = run.mode {
        cfg.mode = mode;
    }
    Ok(cfg)
}

/// Writes the CSV to `--out` (or stdout) and the resolved configuration to
/// the sidecar: `<out>.cfg` next to the output, or `aoii-<command>.cfg` in
/// the working directory for stdout runs.
fn emit(
    out: &Option<PathBuf>,
    csv: &str,
    command: &str,
    resolved: &str,
) -> Result<(), CliError> {
    let sidecar_body = format!("command={command}\n{resolved}");
    match out {
        Some(path) => {
            std::fs::write(path, csv)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            let mut sidecar = path.as_os_str().to_owned();
            sidecar.push(".cfg");
            let sidecar = PathBuf::from(sidecar);
            std::fs::write(&sidecar, sidecar_body).map_err(|e| {
                CliError::Config(format!("cannot write {}: {e}", sidecar.display()))
            })?;
        }
        None => {
            print!("{csv}");
            let sidecar = PathBuf::from(format!("aoii-{command}.cfg"));
            std::fs::write(&sidecar, sidecar_body).map_err(|e| {
                CliError::Config(format!("cannot write {}: {e}", sidecar.display()))
            })?;
        }
    }
    Ok(())
}
