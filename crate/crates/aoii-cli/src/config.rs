//! Plain-text `key=value` experiment configuration.
//!
//! One key per line, `#` starts a comment, blank lines ignored. Unknown keys
//! are rejected so typos fail loudly. Every run echoes the fully resolved
//! configuration (defaults included) to a sidecar file, so a run can be
//! reproduced from its outputs alone.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use aoii::{apps, PenaltySpec, SolverOptions, SourceChannelParams};

/// What a command computes per grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Closed-form outputs only.
    Analytic,
    /// Monte-Carlo outputs only.
    Simulate,
    /// Both, side by side.
    Both,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Analytic => "analytic",
            Mode::Simulate => "simulate",
            Mode::Both => "both",
        })
    }
}

/// Penalty selection plus its parameters.
#[derive(Debug, Clone)]
pub enum PenaltyConfig {
    Linear,
    Error,
    TimeThreshold { zeta: f64 },
    Video(apps::VideoParams),
    Weibull { params: apps::WeibullParams, eps: f64 },
    Fire(apps::FireParams),
}

impl PenaltyConfig {
    pub fn build(&self) -> Result<PenaltySpec, aoii::Error> {
        match self {
            PenaltyConfig::Linear => Ok(apps::linear_f()),
            PenaltyConfig::Error => Ok(apps::error_f()),
            PenaltyConfig::TimeThreshold { zeta } => apps::time_threshold_f(*zeta),
            PenaltyConfig::Video(p) => apps::video_f(p),
            PenaltyConfig::Weibull { params, eps } => apps::weibull_f(params, *eps),
            PenaltyConfig::Fire(p) => apps::fire_f(p),
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub beta: f64,
    pub p_s: f64,
    pub deltas: Vec<f64>,
    pub penalty: PenaltyConfig,
    pub slots: u64,
    pub seed: u64,
    pub mode: Mode,
    pub eps_lambda: f64,
    pub eps_tail: f64,
}

impl ExperimentConfig {
    /// Validated source/channel parameters for one grid cell.
    pub fn params(&self, delta: f64) -> Result<SourceChannelParams, aoii::Error> {
        SourceChannelParams::new(self.alpha, self.beta, self.p_s, delta)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            eps_lambda: self.eps_lambda,
            eps_tail: self.eps_tail,
            ..SolverOptions::default()
        }
    }

    /// Canonical `key=value` text of the resolved configuration, written to
    /// the sidecar file of every run.
    pub fn resolved_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("alpha={}\n", self.alpha));
        out.push_str(&format!("beta={}\n", self.beta));
        out.push_str(&format!("p_s={}\n", self.p_s));
        out.push_str(&format!(
            "delta_grid={}\n",
            self.deltas
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));
        match &self.penalty {
            PenaltyConfig::Linear => out.push_str("penalty=linear\n"),
            PenaltyConfig::Error => out.push_str("penalty=error\n"),
            PenaltyConfig::TimeThreshold { zeta } => {
                out.push_str("penalty=time_threshold\n");
                out.push_str(&format!("time_threshold_zeta={zeta}\n"));
            }
            PenaltyConfig::Video(v) => {
                out.push_str("penalty=video\n");
                out.push_str(&format!("video_gamma={}\n", v.gamma));
                out.push_str(&format!("video_alpha0={}\n", v.alpha0));
                out.push_str(&format!("video_rho={}\n", v.rho));
                out.push_str(&format!("video_c={}\n", v.c));
            }
            PenaltyConfig::Weibull { params, eps } => {
                out.push_str("penalty=weibull\n");
                out.push_str(&format!("weibull_gamma={}\n", params.gamma));
                out.push_str(&format!("weibull_rho={}\n", params.rho));
                out.push_str(&format!("weibull_eps={eps}\n"));
            }
            PenaltyConfig::Fire(f) => {
                out.push_str("penalty=fire\n");
                out.push_str(&format!("fire_f_max={}\n", f.f_max));
                out.push_str(&format!("fire_f_init={}\n", f.f_init));
                out.push_str(&format!("fire_gamma={}\n", f.gamma));
            }
        }
        out.push_str(&format!("slots={}\n", self.slots));
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str(&format!("mode={}\n", self.mode));
        out.push_str(&format!("eps_lambda={}\n", self.eps_lambda));
        out.push_str(&format!("eps_tail={}\n", self.eps_tail));
        out
    }
}

/// Configuration-level failure: bad syntax, unknown key, missing key,
/// unparsable value, empty grid.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Parses a `key=value` file into a map, rejecting duplicates and syntax
/// noise.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(idx) => &raw[..idx],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "line {}: expected key=value, got {raw:?}",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if map.insert(key.clone(), value).is_some() {
            return Err(ConfigError(format!("duplicate key {key:?}")));
        }
    }
    Ok(map)
}

const KNOWN_KEYS: &[&str] = &[
    "alpha",
    "beta",
    "p_s",
    "delta",
    "delta_grid",
    "penalty",
    "time_threshold_zeta",
    "video_gamma",
    "video_alpha0",
    "video_rho",
    "video_c",
    "weibull_gamma",
    "weibull_rho",
    "weibull_eps",
    "fire_f_max",
    "fire_f_init",
    "fire_gamma",
    "slots",
    "seed",
    "mode",
    "eps_lambda",
    "eps_tail",
];

/// Loads and resolves an experiment configuration file.
pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let map = parse_kv(&text)?;
    for key in map.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError(format!("unknown key {key:?}")));
        }
    }

    let req_f64 = |key: &str| -> Result<f64, ConfigError> {
        let raw = map
            .get(key)
            .ok_or_else(|| ConfigError(format!("missing required key {key:?}")))?;
        raw.parse()
            .map_err(|_| ConfigError(format!("{key}: not a number: {raw:?}")))
    };
    let opt_f64 = |key: &str, default: f64| -> Result<f64, ConfigError> {
        match map.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| ConfigError(format!("{key}: not a number: {raw:?}"))),
        }
    };
    let opt_u64 = |key: &str, default: u64| -> Result<u64, ConfigError> {
        match map.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| ConfigError(format!("{key}: not an integer: {raw:?}"))),
        }
    };

    let deltas = match (map.get("delta"), map.get("delta_grid")) {
        (Some(_), Some(_)) => {
            return Err(ConfigError("give delta or delta_grid, not both".into()))
        }
        (Some(raw), None) => vec![raw
            .parse()
            .map_err(|_| ConfigError(format!("delta: not a number: {raw:?}")))?],
        (None, Some(raw)) => {
            let grid: Result<Vec<f64>, _> = raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect();
            let grid =
                grid.map_err(|_| ConfigError(format!("delta_grid: bad number in {raw:?}")))?;
            if grid.is_empty() {
                return Err(ConfigError("delta_grid: grid is empty".into()));
            }
            grid
        }
        (None, None) => return Err(ConfigError("missing required key delta".into())),
    };

    let penalty = match map.get("penalty").map(String::as_str) {
        None => return Err(ConfigError("missing required key penalty".into())),
        Some("linear") => PenaltyConfig::Linear,
        Some("error") => PenaltyConfig::Error,
        Some("time_threshold") => PenaltyConfig::TimeThreshold {
            zeta: req_f64("time_threshold_zeta")?,
        },
        Some("video") => PenaltyConfig::Video(apps::VideoParams {
            gamma: opt_f64("video_gamma", 1.0)?,
            alpha0: opt_f64("video_alpha0", 4.0)?,
            rho: opt_f64("video_rho", 0.8)?,
            c: opt_f64("video_c", 2.0)?,
        }),
        Some("weibull") => PenaltyConfig::Weibull {
            params: apps::WeibullParams {
                gamma: opt_f64("weibull_gamma", 1.0)?,
                rho: opt_f64("weibull_rho", 1.0)?,
            },
            eps: opt_f64("weibull_eps", 1e-3)?,
        },
        Some("fire") => PenaltyConfig::Fire(apps::FireParams {
            f_max: opt_f64("fire_f_max", 10.0)?,
            f_init: opt_f64("fire_f_init", 1.0)?,
            gamma: opt_f64("fire_gamma", 0.1)?,
        }),
        Some(other) => {
            return Err(ConfigError(format!(
                "penalty: unknown name {other:?} (expected linear|error|time_threshold|video|weibull|fire)"
            )))
        }
    };

    let mode = match map.get("mode").map(String::as_str) {
        None => Mode::Analytic,
        Some("analytic") => Mode::Analytic,
        Some("simulate") => Mode::Simulate,
        Some("both") => Mode::Both,
        Some(other) => {
            return Err(ConfigError(format!(
                "mode: expected analytic|simulate|both, got {other:?}"
            )))
        }
    };

    Ok(ExperimentConfig {
        alpha: req_f64("alpha")?,
        beta: req_f64("beta")?,
        p_s: req_f64("p_s")?,
        deltas,
        penalty,
        slots: opt_u64("slots", 1_000_000)?,
        seed: opt_u64("seed", 0)?,
        mode,
        eps_lambda: opt_f64("eps_lambda", 1e-6)?,
        eps_tail: opt_f64("eps_tail", 1e-12)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_defaults() {
        let text = "alpha=0.2  # source\nbeta=0.9\np_s=0.8\ndelta=0.4\npenalty=linear\n";
        let map = parse_kv(text).unwrap();
        assert_eq!(map.get("alpha").unwrap(), "0.2");
        let dir = std::env::temp_dir().join("aoii-cfg-test.cfg");
        std::fs::write(&dir, text).unwrap();
        let cfg = load_experiment(&dir).unwrap();
        assert_eq!(cfg.slots, 1_000_000);
        assert_eq!(cfg.mode, Mode::Analytic);
        assert_eq!(cfg.deltas, vec![0.4]);
        assert!(cfg.resolved_text().contains("penalty=linear"));
    }

    #[test]
    fn rejects_unknown_keys_and_empty_grids() {
        let dir = std::env::temp_dir().join("aoii-cfg-bad.cfg");
        std::fs::write(&dir, "alpha=0.2\nbeta=0.9\np_s=0.8\ndelta=0.4\npenalty=linear\ntypo=1\n")
            .unwrap();
        assert!(load_experiment(&dir).is_err());
        std::fs::write(
            &dir,
            "alpha=0.2\nbeta=0.9\np_s=0.8\ndelta_grid=,\npenalty=linear\n",
        )
        .unwrap();
        let err = load_experiment(&dir).unwrap_err();
        assert!(err.0.contains("empty"), "{err}");
    }
}
