//! Photon-statistics observables: occupation, mean field, equal-time and
//! two-time second-order correlation functions, and the drive-rate
//! function that controls how the equal-time correlation moves.
//!
//! For a state ρ the record carries `n = ⟨a†a⟩`, `ψ = ⟨a⟩`,
//! `C = ⟨a†aa⟩`, `g₂ = ⟨a†a†aa⟩/n²` and
//! `f = (g₂ n Im ψ − Im C)/n²`. On pulse-free stretches of a real drive
//! `P`, the equal-time correlation obeys `dg₂/dt = 4 P f`, which
//! [`validate_rate_law`] checks against finite differences. Below
//! [`N_FLOOR`] occupation, `g₂` and `f` are reported as undefined rather
//! than dividing by a vanishing `n²`.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::dynamics::{self, DensityMatrix, DriveSchedule, ModeParams, PulseShape};
use crate::fock::{expectation_raw, FockSpace, Operator};
use crate::ode::OdeOptions;
use crate::{Error, Result};

/// Occupations below this floor leave `g₂` and `f` undefined.
pub const N_FLOOR: f64 = 1e-12;

/// Per-sample observables along a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct ObservableRecord {
    pub t: f64,
    /// Occupation `⟨a†a⟩`.
    pub n: f64,
    /// Mean field `⟨a⟩`.
    pub psi: C64,
    /// `⟨a†aa⟩`.
    pub c: C64,
    /// Equal-time second-order correlation, undefined below `N_FLOOR`.
    pub g2: Option<f64>,
    /// Rate-law function, undefined below `N_FLOOR`.
    pub f: Option<f64>,
    /// True when this sample coincides with an instantaneous pulse.
    pub pulse: bool,
}

// Cached operator set for fast per-sample evaluation.
pub(crate) struct ObservableOps {
    n_op: Operator,
    a_op: Operator,
    c_op: Operator,
    pair_op: Operator,
}

impl ObservableOps {
    pub(crate) fn new(space: &FockSpace) -> Self {
        Self {
            n_op: space.number().clone(),
            a_op: space.annihilate().clone(),
            c_op: space.number().dot(space.annihilate()),
            pair_op: space.pair().clone(),
        }
    }

    pub(crate) fn record(&self, t: f64, mat: &Array2<C64>, pulse: bool) -> ObservableRecord {
        let n = expectation_raw(&self.n_op, mat).unwrap().re;
        let psi = expectation_raw(&self.a_op, mat).unwrap();
        let c = expectation_raw(&self.c_op, mat).unwrap();
        let (g2, f) = if n < N_FLOOR {
            (None, None)
        } else {
            let pair = expectation_raw(&self.pair_op, mat).unwrap().re;
            let g2 = pair / (n * n);
            let f = (g2 * n * psi.im - c.im) / (n * n);
            (Some(g2), Some(f))
        };
        ObservableRecord {
            t,
            n,
            psi,
            c,
            g2,
            f,
            pulse,
        }
    }
}

/// Equal-time second-order correlation `⟨a†a†aa⟩ / n²` of a state, or
/// `None` when the occupation is below [`N_FLOOR`].
pub fn g2_equal(space: &FockSpace, rho: &DensityMatrix) -> Result<Option<f64>> {
    if rho.dim() != space.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), space.dim()));
    }
    let n = rho.expect(space.number())?.re;
    if n < N_FLOOR {
        return Ok(None);
    }
    let pair = rho.expect(space.pair())?.re;
    Ok(Some(pair / (n * n)))
}

/// The rate-law function `f = (g₂ n Im ψ − Im C)/n²` of a state, or
/// `None` when the occupation is below [`N_FLOOR`].
pub fn f_of_state(space: &FockSpace, rho: &DensityMatrix) -> Result<Option<f64>> {
    if rho.dim() != space.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), space.dim()));
    }
    let n = rho.expect(space.number())?.re;
    if n < N_FLOOR {
        return Ok(None);
    }
    let psi = rho.expect(space.annihilate())?;
    let c_op = space.number().dot(space.annihilate());
    let c = rho.expect(&c_op)?;
    let pair = rho.expect(space.pair())?.re;
    let g2 = pair / (n * n);
    Ok(Some((g2 * n * psi.im - c.im) / (n * n)))
}

/// Result of a window search for the correlation minimum.
#[derive(Debug, Clone, Copy)]
pub struct WindowMin {
    pub t_s: f64,
    pub g2_min: f64,
    pub n_at_min: f64,
}

/// Time of minimal equal-time correlation inside `[a, b]`, ties broken
/// toward the earliest sample. Undefined samples are skipped; if the
/// window holds none, [`Error::EmptyWindow`] is returned.
pub fn find_window_min(traj: &dynamics::Trajectory, a: f64, b: f64) -> Result<WindowMin> {
    if a > b {
        return Err(Error::InvalidArgument(format!(
            "window reversed: [{a}, {b}]"
        )));
    }
    let t_first = *traj.times().first().unwrap_or(&0.0);
    let t_last = *traj.times().last().unwrap_or(&0.0);
    let eps = 1e-9 * t_last.abs().max(1.0);
    if a < t_first - eps || b > t_last + eps {
        return Err(Error::RangeError(format!(
            "window [{a}, {b}] outside the trajectory [{t_first}, {t_last}]"
        )));
    }
    let mut best: Option<WindowMin> = None;
    for rec in traj.window(a, b) {
        let Some(g2) = rec.g2 else { continue };
        let better = match &best {
            None => true,
            Some(w) => g2 < w.g2_min,
        };
        if better {
            best = Some(WindowMin {
                t_s: rec.t,
                g2_min: g2,
                n_at_min: rec.n,
            });
        }
    }
    best.ok_or(Error::EmptyWindow)
}

/// Outcome of the rate-law comparison along a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct RateLawReport {
    /// Samples entering the finite-difference comparison.
    pub samples_checked: usize,
    /// Max of `|dg₂/dt − 4 P f|` over checked samples.
    pub max_abs_residual: f64,
    /// Max of `|4 P f|` over checked samples.
    pub max_drive_term: f64,
    /// `max_abs_residual / max_drive_term`, when the drive term is nonzero.
    pub max_relative_residual: Option<f64>,
    /// Max of `|dg₂/dt|` over checked samples (the quantity that must
    /// vanish when the continuous drive is off).
    pub max_abs_derivative: f64,
}

/// Compare centered finite differences of `g₂(t,t)` against `4 P(t) f(t)`
/// on pulse-free samples, optionally restricted to `[t_from, t_to]`.
///
/// Requires a real drive and a dense grid (`sample_dt ≤ 0.01`). The
/// derivative uses a fourth-order centered stencil: the correlation
/// carries narrow bunching spikes at the field-cancellation dips of each
/// period (features a few dozen samples wide on a 0.005 grid), where a
/// second-order stencil's truncation error alone would swamp the
/// residual being measured. Samples whose stencil touches an
/// instantaneous pulse are excluded, as are samples with occupation
/// below `10·N_FLOOR`.
pub fn validate_rate_law_window(
    traj: &dynamics::Trajectory,
    t_from: f64,
    t_to: f64,
) -> Result<RateLawReport> {
    if !traj.schedule().is_real() {
        return Err(Error::UnsupportedConfiguration(
            "rate-law validation requires a real drive".into(),
        ));
    }
    if traj.sample_dt() > 0.01 + 1e-12 {
        return Err(Error::UnsupportedConfiguration(format!(
            "rate-law validation needs sample_dt <= 0.01, got {}",
            traj.sample_dt()
        )));
    }
    let records = traj.records();
    if records.len() < 5 {
        return Err(Error::InvalidArgument(
            "trajectory too short for finite differences".into(),
        ));
    }
    let dt = traj.sample_dt();

    // Grid indices of instantaneous pulses; stencils touching them are out.
    let pulse_indices: Vec<usize> = traj
        .schedule()
        .pulses()
        .iter()
        .filter(|p| matches!(p.shape, PulseShape::Delta))
        .map(|p| traj.index_of_time(p.time))
        .collect();
    let near_pulse = |k: usize| pulse_indices.iter().any(|&p| k.abs_diff(p) <= 2);

    let mut report = RateLawReport {
        samples_checked: 0,
        max_abs_residual: 0.0,
        max_drive_term: 0.0,
        max_relative_residual: None,
        max_abs_derivative: 0.0,
    };

    for k in 2..records.len() - 2 {
        let mid = &records[k];
        if mid.t < t_from || mid.t > t_to || near_pulse(k) {
            continue;
        }
        if mid.n <= 10.0 * N_FLOOR {
            continue;
        }
        let (Some(g2_m2), Some(g2_m1), Some(f_mid), Some(g2_p1), Some(g2_p2)) = (
            records[k - 2].g2,
            records[k - 1].g2,
            mid.f,
            records[k + 1].g2,
            records[k + 2].g2,
        ) else {
            continue;
        };
        let deriv = (g2_m2 - 8.0 * g2_m1 + 8.0 * g2_p1 - g2_p2) / (12.0 * dt);
        let p_t = traj.schedule().smooth_amplitude(mid.t).re;
        let drive_term = 4.0 * p_t * f_mid;
        let residual = (deriv - drive_term).abs();
        report.samples_checked += 1;
        report.max_abs_residual = report.max_abs_residual.max(residual);
        report.max_drive_term = report.max_drive_term.max(drive_term.abs());
        report.max_abs_derivative = report.max_abs_derivative.max(deriv.abs());
    }
    if report.max_drive_term > 0.0 {
        report.max_relative_residual = Some(report.max_abs_residual / report.max_drive_term);
    }
    Ok(report)
}

/// [`validate_rate_law_window`] over the whole trajectory.
pub fn validate_rate_law(traj: &dynamics::Trajectory) -> Result<RateLawReport> {
    let t_to = *traj.times().last().unwrap_or(&0.0);
    validate_rate_law_window(traj, 0.0, t_to)
}

/// Two-time correlation `g₂(t, t_s)` on a grid of `t`, with fixed
/// reference time `t_s`.
#[derive(Debug, Clone)]
pub struct TwoTimeResult {
    pub t_s: f64,
    pub times: Vec<f64>,
    pub values: Vec<Option<f64>>,
    /// Occupation at the reference time.
    pub n_ts: f64,
}

impl TwoTimeResult {
    /// Value at the grid point nearest `t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - t).abs().total_cmp(&(*b - t).abs()))?
            .0;
        self.values[idx]
    }
}

/// Two-time correlation by quantum regression, forward from the
/// reference time.
///
/// The regression operator `a ρ(t_s) a†` is propagated by the same
/// generator (and the same pulse sandwiches) as the physical state;
/// the numerator at `t` is `tr(a†a · Λ[a ρ a†])` and the denominator
/// uses the physical `n(t)·n(t_s)`. The grid must be ascending and lie
/// within `[t_s, t_s + horizon]`; values at reference times with
/// occupation below [`N_FLOOR`] are undefined.
pub fn g2_two_time(
    space: &FockSpace,
    params: &ModeParams,
    schedule: &DriveSchedule,
    rho_ts: &DensityMatrix,
    t_s: f64,
    t_grid: &[f64],
    horizon: f64,
    ode_opts: &OdeOptions,
) -> Result<TwoTimeResult> {
    if rho_ts.dim() != space.dim() {
        return Err(Error::DimensionMismatch(rho_ts.dim(), space.dim()));
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "time grid must be strictly increasing".into(),
        ));
    }
    let eps = 1e-9 * (t_s.abs() + horizon).max(1.0);
    if t_grid[0] < t_s - eps || *t_grid.last().unwrap() > t_s + horizon + eps {
        return Err(Error::RangeError(format!(
            "grid [{}, {}] escapes [{}, {}]",
            t_grid[0],
            t_grid.last().unwrap(),
            t_s,
            t_s + horizon
        )));
    }

    let n_op = space.number();
    let n_ts = rho_ts.expect(n_op)?.re;

    // Regression operator X = a ρ a† (unnormalized; divided out at the end).
    let a_op = space.annihilate();
    let x0 = a_op.dot(rho_ts.matrix()).dot(space.create());

    let mut numer: Vec<f64> = vec![0.0; t_grid.len()];
    let mut n_phys: Vec<f64> = vec![0.0; t_grid.len()];

    // Grid points at the reference time come straight from the anchors.
    let mut fwd_times: Vec<f64> = Vec::with_capacity(t_grid.len());
    let mut fwd_map: Vec<usize> = Vec::with_capacity(t_grid.len());
    for (i, &t) in t_grid.iter().enumerate() {
        if (t - t_s).abs() <= eps {
            numer[i] = expectation_raw(n_op, &x0)?.re;
            n_phys[i] = n_ts;
        } else {
            fwd_times.push(t);
            fwd_map.push(i);
        }
    }

    if !fwd_times.is_empty() {
        let mut x = x0.clone();
        dynamics::propagate(
            space,
            params,
            schedule,
            &mut x,
            t_s,
            &fwd_times,
            ode_opts,
            |k, _t, mat| {
                numer[fwd_map[k]] = expectation_raw(n_op, mat).unwrap().re;
                Ok(())
            },
            |_, _, _| Ok(()),
        )?;
        let mut rho = rho_ts.matrix().clone();
        dynamics::propagate(
            space,
            params,
            schedule,
            &mut rho,
            t_s,
            &fwd_times,
            ode_opts,
            |k, _t, mat| {
                n_phys[fwd_map[k]] = expectation_raw(n_op, mat).unwrap().re;
                Ok(())
            },
            |_, _, _| Ok(()),
        )?;
    }

    let values = t_grid
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if n_ts < N_FLOOR || n_phys[i] < N_FLOOR {
                None
            } else {
                Some(numer[i] / (n_phys[i] * n_ts))
            }
        })
        .collect();

    Ok(TwoTimeResult {
        t_s,
        times: t_grid.to_vec(),
        values,
        n_ts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, DriveSchedule, EvolveOptions, ModeParams};
    use ndarray::Array2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn g2_of_number_states() {
        let s = FockSpace::new(8).unwrap();
        let one = DensityMatrix::number_state(&s, 1).unwrap();
        assert_eq!(g2_equal(&s, &one).unwrap(), Some(0.0));
        let two = DensityMatrix::number_state(&s, 2).unwrap();
        let g2 = g2_equal(&s, &two).unwrap().unwrap();
        assert!((g2 - 0.5).abs() < 1e-13);
    }

    #[test]
    fn g2_of_coherent_state_is_one() {
        let s = FockSpace::new(30).unwrap();
        let rho = DensityMatrix::coherent(&s, c(0.6, -0.3));
        let g2 = g2_equal(&s, &rho).unwrap().unwrap();
        assert!((g2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn g2_of_vacuum_is_undefined() {
        let s = FockSpace::new(8).unwrap();
        let vac = DensityMatrix::vacuum(&s);
        assert_eq!(g2_equal(&s, &vac).unwrap(), None);
        assert_eq!(f_of_state(&s, &vac).unwrap(), None);
    }

    #[test]
    fn g2_of_thermal_state_is_two() {
        // Bose-Einstein diagonal state with mean occupation 0.3.
        let dim = 30;
        let s = FockSpace::new(dim).unwrap();
        let nbar = 0.3_f64;
        let ratio = nbar / (1.0 + nbar);
        let mut mat = Array2::<C64>::zeros((dim, dim));
        let mut w = 1.0;
        let mut norm = 0.0;
        for k in 0..dim {
            mat[(k, k)] = c(w, 0.0);
            norm += w;
            w *= ratio;
        }
        for k in 0..dim {
            mat[(k, k)] /= C64::from(norm);
        }
        let rho = DensityMatrix::from_matrix(mat).unwrap();
        let g2 = g2_equal(&s, &rho).unwrap().unwrap();
        assert!((g2 - 2.0).abs() < 1e-6, "g2 = {g2}");
    }

    #[test]
    fn pair_operator_vanishes_identically_at_dim_two() {
        // With only |0⟩ and |1⟩ retained, a†a†aa is the zero matrix, so
        // any state there reports g2 = 0. Production scenarios must use
        // larger spaces.
        let s = FockSpace::new(2).unwrap();
        assert_eq!(crate::linalg::max_abs(s.pair()), 0.0);
        let mut mat = Array2::<C64>::zeros((2, 2));
        mat[(0, 0)] = c(0.5, 0.0);
        mat[(1, 1)] = c(0.5, 0.0);
        let rho = DensityMatrix::from_matrix(mat).unwrap();
        assert_eq!(g2_equal(&s, &rho).unwrap(), Some(0.0));
    }

    #[test]
    fn f_vanishes_for_coherent_and_steady_states() {
        let s = FockSpace::new(25).unwrap();
        let rho = DensityMatrix::coherent(&s, c(0.4, 0.2));
        let f = f_of_state(&s, &rho).unwrap().unwrap();
        assert!(f.abs() < 1e-9, "coherent f = {f}");

        let params = ModeParams::new(2.0, 0.05).unwrap();
        let ss = dynamics::steady_state_direct(&s, &params, c(0.5, 0.0)).unwrap();
        let f_ss = f_of_state(&s, &ss).unwrap().unwrap();
        assert!(f_ss.abs() < 1e-8, "steady-state f = {f_ss}");
    }

    #[test]
    fn window_min_prefers_earliest_on_ties() {
        // A pulse-free decaying mode has constant g2, so the argmin must
        // be the window start.
        let s = FockSpace::new(20).unwrap();
        let params = ModeParams::new(0.5, 0.3).unwrap();
        let schedule = DriveSchedule::continuous(c(0.0, 0.0), 1.0).unwrap();
        let rho0 = DensityMatrix::coherent(&s, c(0.8, 0.0));
        let traj = evolve(&s, &params, &schedule, &rho0, &EvolveOptions::new(2.0, 0.1)).unwrap();
        let w = find_window_min(&traj, 0.5, 1.5).unwrap();
        assert!((w.t_s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn window_min_rejects_undefined_windows() {
        let s = FockSpace::new(10).unwrap();
        let params = ModeParams::new(0.0, 0.0).unwrap();
        let schedule = DriveSchedule::continuous(c(0.0, 0.0), 1.0).unwrap();
        let rho0 = DensityMatrix::vacuum(&s);
        let traj = evolve(&s, &params, &schedule, &rho0, &EvolveOptions::new(1.0, 0.1)).unwrap();
        assert!(matches!(
            find_window_min(&traj, 0.0, 1.0),
            Err(Error::EmptyWindow)
        ));
        assert!(matches!(
            find_window_min(&traj, 0.0, 5.0),
            Err(Error::RangeError(_))
        ));
    }

    #[test]
    fn rate_law_requires_real_drive_and_dense_sampling() {
        let s = FockSpace::new(10).unwrap();
        let params = ModeParams::new(1.0, 0.1).unwrap();
        let complex_drive = DriveSchedule::continuous(c(0.2, 0.1), 1.0).unwrap();
        let rho0 = DensityMatrix::vacuum(&s);
        let traj = evolve(
            &s,
            &params,
            &complex_drive,
            &rho0,
            &EvolveOptions::new(1.0, 0.005),
        )
        .unwrap();
        assert!(matches!(
            validate_rate_law(&traj),
            Err(Error::UnsupportedConfiguration(_))
        ));

        let real_drive = DriveSchedule::continuous(c(0.2, 0.0), 1.0).unwrap();
        let coarse = evolve(
            &s,
            &params,
            &real_drive,
            &rho0,
            &EvolveOptions::new(1.0, 0.1),
        )
        .unwrap();
        assert!(matches!(
            validate_rate_law(&coarse),
            Err(Error::UnsupportedConfiguration(_))
        ));
    }

    #[test]
    fn rate_law_holds_on_a_driven_transient() {
        let s = FockSpace::new(20).unwrap();
        let params = ModeParams::new(2.0, 0.05).unwrap();
        let schedule = DriveSchedule::continuous(c(0.3, 0.0), 1.0).unwrap();
        let rho0 = DensityMatrix::vacuum(&s);
        let traj = evolve(
            &s,
            &params,
            &schedule,
            &rho0,
            &EvolveOptions::new(4.0, 0.005),
        )
        .unwrap();
        let report = validate_rate_law(&traj).unwrap();
        assert!(report.samples_checked > 100);
        let rel = report.max_relative_residual.unwrap();
        assert!(rel < 1e-3, "relative residual {rel}");
    }

    #[test]
    fn two_time_at_zero_delay_matches_equal_time() {
        let s = FockSpace::new(20).unwrap();
        let params = ModeParams::new(0.25, 1.0).unwrap();
        let schedule = DriveSchedule::continuous(c(0.5, 0.0), 1.0).unwrap();
        let rho = dynamics::steady_state_direct(&s, &params, c(0.5, 0.0)).unwrap();
        let grid = [3.0, 3.5, 4.0];
        let res = g2_two_time(
            &s,
            &params,
            &schedule,
            &rho,
            3.0,
            &grid,
            2.0,
            &OdeOptions::default(),
        )
        .unwrap();
        let eq = g2_equal(&s, &rho).unwrap().unwrap();
        let at_ts = res.values[0].unwrap();
        assert!((at_ts - eq).abs() < 1e-8, "{at_ts} vs {eq}");
    }

    #[test]
    fn two_time_of_linear_mode_is_flat() {
        let s = FockSpace::new(20).unwrap();
        let params = ModeParams::new(2.0, 0.0).unwrap();
        let schedule = DriveSchedule::continuous(c(0.5, 0.0), 1.0).unwrap();
        let rho = dynamics::steady_state_direct(&s, &params, c(0.5, 0.0)).unwrap();
        let grid: Vec<f64> = (0..=40).map(|k| 5.0 + 0.05 * k as f64).collect();
        let res = g2_two_time(
            &s,
            &params,
            &schedule,
            &rho,
            5.0,
            &grid,
            2.5,
            &OdeOptions::default(),
        )
        .unwrap();
        for v in res.values.iter().flatten() {
            assert!((v - 1.0).abs() < 1e-6, "two-time value {v}");
        }
    }

    #[test]
    fn two_time_rejects_out_of_range_grids() {
        let s = FockSpace::new(10).unwrap();
        let params = ModeParams::new(1.0, 0.2).unwrap();
        let schedule = DriveSchedule::continuous(c(0.2, 0.0), 1.0).unwrap();
        let rho = dynamics::steady_state_direct(&s, &params, c(0.2, 0.0)).unwrap();
        let res = g2_two_time(
            &s,
            &params,
            &schedule,
            &rho,
            2.0,
            &[2.0, 6.0],
            1.0,
            &OdeOptions::default(),
        );
        assert!(matches!(res, Err(Error::RangeError(_))));
    }
}
