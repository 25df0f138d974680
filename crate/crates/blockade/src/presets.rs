//! Canonical scenario parameter sets.
//!
//! Two operating points recur throughout the experiments: a weakly
//! nonlinear mode (`α = 0.05`, detuned at `E = 2`) where conventional
//! continuous driving barely antibunches, and a strongly nonlinear mode
//! (`α = 1`, `E = 0.25`) tuned so continuous driving already blockades.
//! All values are in units of the decay rate.

use num_complex::Complex64 as C64;

use crate::dynamics::{ModeParams, PulseShape};
use crate::experiments::ScenarioConfig;

/// Default space size for weak-nonlinearity scenarios.
pub const WEAK_DIM: usize = 25;
/// Default space size for strong-nonlinearity scenarios.
pub const STRONG_DIM: usize = 20;

fn base(energy: f64, kerr: f64, p0: f64, p1: f64, period: f64, dim: usize) -> ScenarioConfig {
    ScenarioConfig {
        mode: ModeParams::new(energy, kerr).expect("preset mode parameters are valid"),
        p0: C64::new(p0, 0.0),
        p1: C64::new(p1, 0.0),
        period,
        shape: PulseShape::Delta,
        dim,
        warmup_periods: 2,
        measure_periods: 2,
        sample_dt: 0.02,
        ode: crate::ode::OdeOptions::default(),
    }
}

/// Weak nonlinearity with a strong unit-area pulse on top of a faint
/// continuous drive; the configuration whose combined/continuous/
/// pulses-only comparison exhibits the dynamical blockade mechanism.
pub fn weak_drive_comparison() -> ScenarioConfig {
    base(2.0, 0.05, 0.2, 1.0, 18.5, WEAK_DIM)
}

/// Weak nonlinearity at moderate drive; the base point of the occupation
/// sweep (`p0` is the swept knob) and of the weak-regime two-time scan.
pub fn weak_occupation_base() -> ScenarioConfig {
    base(2.0, 0.05, 0.5, 0.5, 18.5, WEAK_DIM)
}

/// Strong nonlinearity tuned for conventional blockade; adding the pulse
/// train on top both deepens the antibunching and raises the occupation.
pub fn strong_enhancement() -> ScenarioConfig {
    base(0.25, 1.0, 0.5, 0.2, 12.3, STRONG_DIM)
}

/// Base point for the regime map over `(α, P0)`. Larger space than the
/// single strong-point scenario because the map's low-α / high-drive
/// corner reaches occupations near four.
pub fn regime_map_base() -> ScenarioConfig {
    base(0.25, 1.0, 0.5, 0.2, 12.3, WEAK_DIM)
}

/// Logarithmically spaced grid from `lo` to `hi` (inclusive).
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && points >= 2);
    let step = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|k| lo * (step * k as f64).exp()).collect()
}

/// Default drive grid for occupation sweeps.
pub fn default_p0_grid() -> Vec<f64> {
    log_grid(0.05, 1.0, 20)
}

/// Default nonlinearity grid for regime maps.
pub fn default_alpha_grid() -> Vec<f64> {
    log_grid(0.02, 2.0, 20)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints_and_monotonicity() {
        let g = log_grid(0.05, 1.0, 20);
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.05).abs() < 1e-12);
        assert!((g.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
