//! Built-in parameter fixtures for the `reproduce` targets, so the
//! comparison scenarios run with no arguments.

use aoii::{apps, PenaltySpec};

/// One pinned comparison scenario.
pub struct Scenario {
    pub name: &'static str,
    pub alpha: f64,
    pub beta: f64,
    pub p_s: f64,
    pub penalty: PenaltySpec,
    /// Whether the information-age baseline participates (it needs an
    /// unreliable-channel setting to be interesting and is omitted for the
    /// decision-process scenario).
    pub with_aoi_baseline: bool,
}

/// Linear-penalty head-to-head table: three budgets, two policies.
pub fn table2() -> Scenario {
    Scenario {
        name: "table2",
        alpha: 0.2,
        beta: 0.9,
        p_s: 0.8,
        penalty: apps::linear_f(),
        with_aoi_baseline: false,
    }
}

/// Budgets used by the head-to-head table.
pub const TABLE2_DELTAS: [f64; 3] = [0.05, 0.1, 0.4];

/// Video-distortion comparison scenario.
pub fn fig6a() -> Scenario {
    Scenario {
        name: "fig6a",
        alpha: 0.5,
        beta: 0.8,
        p_s: 0.8,
        penalty: apps::video_f(&apps::VideoParams::paper()).expect("fixture is valid"),
        with_aoi_baseline: true,
    }
}

/// Machine-overheating (Weibull breakdown) comparison scenario.
pub fn fig6b() -> Scenario {
    Scenario {
        name: "fig6b",
        alpha: 0.2,
        beta: 0.9,
        p_s: 0.8,
        penalty: apps::weibull_f(&apps::WeibullParams::paper(), 1e-3).expect("fixture is valid"),
        with_aoi_baseline: true,
    }
}

/// Fire-damage comparison scenario: absorbing source (`beta = 1`), perfect
/// channel, exact saturation. No age baseline here.
pub fn fig6c() -> Scenario {
    Scenario {
        name: "fig6c",
        alpha: 0.2,
        beta: 1.0,
        p_s: 1.0,
        penalty: apps::fire_f(&apps::FireParams::paper()).expect("fixture is valid"),
        with_aoi_baseline: false,
    }
}

/// Default nine-point budget grid over [0.05, 0.9].
pub fn default_delta_grid() -> Vec<f64> {
    let lo = 0.05;
    let hi = 0.9;
    (0..9).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_nine_points_with_pinned_ends() {
        let g = default_delta_grid();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[8], 0.9);
    }

    #[test]
    fn scenarios_validate() {
        for s in [table2(), fig6a(), fig6b(), fig6c()] {
            assert!(aoii::SourceChannelParams::new(s.alpha, s.beta, s.p_s, 0.5).is_ok());
        }
    }
}
