//! Scenario orchestration: time traces under different drive mixes,
//! occupation sweeps, regime maps over `(α, P0)`, two-time scans, and the
//! self-consistency checks built on top of them.
//!
//! Scenarios start from vacuum and discard a warm-up of full pulse
//! periods (two by default); by the end of the warm-up the mode has
//! relaxed to the continuously driven steady state between pulses, which
//! is the regime where the per-period analysis applies. The measurement
//! window is the first period after warm-up, anchored at the pulse that
//! starts it.

use num_complex::Complex64 as C64;

use crate::dynamics::{
    self, evolve, state_at, steady_state_direct, DensityMatrix, DriveSchedule, EvolveOptions,
    ModeParams, PulseShape, Trajectory,
};
use crate::exec;
use crate::fock::FockSpace;
use crate::observables::{self, find_window_min, g2_two_time, TwoTimeResult, WindowMin};
use crate::ode::OdeOptions;
use crate::{Error, Result};

/// `|∫f dt|` over a settled period must stay below this fraction of
/// `max|f|·T`.
pub const CYCLE_INTEGRAL_TOL: f64 = 1e-3;
/// Pointwise tolerance for reconstructing `g₂(t,t) − g₀` from the running
/// integral of `f`.
pub const CYCLE_POINTWISE_TOL: f64 = 1e-3;
/// `g₂` at the period end must return to `g₀` within this tolerance.
pub const CYCLE_END_TOL: f64 = 1e-4;
/// Settledness gate: `g₂` just before the period-opening pulse must match
/// `g₀` this closely, otherwise the period is rejected.
pub const CYCLE_SETTLED_TOL: f64 = 1e-3;
/// Convergence-ladder agreement required between the two largest spaces.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// What kind of experiment a configuration describes (used by the
/// front-end for dispatch; the library functions below take the
/// parameters directly).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    TimeTrace,
    OccupationSweep,
    Colormap,
    TwoTime,
    Checks,
}

/// Complete description of one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub mode: ModeParams,
    /// Continuous drive amplitude.
    pub p0: C64,
    /// Pulse area.
    pub p1: C64,
    /// Pulse repetition period.
    pub period: f64,
    pub shape: PulseShape,
    pub dim: usize,
    pub warmup_periods: u32,
    pub measure_periods: u32,
    pub sample_dt: f64,
    pub ode: OdeOptions,
}

impl ScenarioConfig {
    pub fn horizon(&self) -> f64 {
        (self.warmup_periods + self.measure_periods) as f64 * self.period
    }

    /// Measurement window: the first full period after warm-up.
    pub fn measure_window(&self) -> (f64, f64) {
        let start = self.warmup_periods as f64 * self.period;
        (start, start + self.period)
    }

    pub fn space(&self) -> Result<FockSpace> {
        FockSpace::new(self.dim)
    }

    /// Pulse train covering the horizon: pulses at `T, 2T, …` up to and
    /// including the horizon end.
    pub fn schedule(&self) -> Result<DriveSchedule> {
        let count = (self.warmup_periods + self.measure_periods) as usize;
        if self.p1 == C64::new(0.0, 0.0) {
            DriveSchedule::continuous(self.p0, self.period)
        } else {
            DriveSchedule::pulse_train(self.p0, self.p1, self.period, count, self.shape)
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_sample_dt(mut self, sample_dt: f64) -> Self {
        self.sample_dt = sample_dt;
        self
    }

    pub fn with_measure_periods(mut self, periods: u32) -> Self {
        self.measure_periods = periods;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.measure_periods < 1 {
            return Err(Error::InvalidArgument(
                "need at least one measurement period".into(),
            ));
        }
        if !(self.sample_dt > 0.0) {
            return Err(Error::InvalidArgument("sample_dt must be positive".into()));
        }
        Ok(())
    }
}

/// Which part of the combined drive a comparison run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveVariant {
    /// Continuous amplitude plus the pulse train.
    Combined,
    /// Continuous amplitude only.
    Continuous,
    /// Pulse train only.
    PulsesOnly,
}

impl DriveVariant {
    pub const ALL: [DriveVariant; 3] = [
        DriveVariant::Combined,
        DriveVariant::Continuous,
        DriveVariant::PulsesOnly,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            DriveVariant::Combined => "combined",
            DriveVariant::Continuous => "continuous",
            DriveVariant::PulsesOnly => "pulses_only",
        }
    }

    /// The scenario with the variant's drive substituted in.
    pub fn apply(&self, cfg: &ScenarioConfig) -> ScenarioConfig {
        let mut out = cfg.clone();
        match self {
            DriveVariant::Combined => {}
            DriveVariant::Continuous => out.p1 = C64::new(0.0, 0.0),
            DriveVariant::PulsesOnly => out.p0 = C64::new(0.0, 0.0),
        }
        out
    }
}

/// Evolve the scenario from vacuum over its full horizon.
pub fn run_time_trace(cfg: &ScenarioConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let space = cfg.space()?;
    let schedule = cfg.schedule()?;
    let rho0 = DensityMatrix::vacuum(&space);
    let mut opts = EvolveOptions::new(cfg.horizon(), cfg.sample_dt);
    opts.ode = cfg.ode;
    evolve(&space, &cfg.mode, &schedule, &rho0, &opts)
}

/// Run one drive variant of the comparison scenario.
pub fn run_drive_comparison(cfg: &ScenarioConfig, variant: DriveVariant) -> Result<Trajectory> {
    run_time_trace(&variant.apply(cfg))
}

/// Conventional (continuous-drive) reference: steady-state `g₂` and
/// occupation for the scenario's mode at drive `p0`.
pub fn conventional_reference(
    space: &FockSpace,
    mode: &ModeParams,
    p0: C64,
) -> Result<(Option<f64>, f64)> {
    let ss = steady_state_direct(space, mode, p0)?;
    let g0 = observables::g2_equal(space, &ss)?;
    let n = ss.expect(space.number())?.re;
    Ok((g0, n))
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub kerr: f64,
    pub p0: f64,
    /// Time of minimal `g₂` in the measurement window.
    pub t_s: f64,
    /// Combined-drive correlation minimum `g₂(t_s, t_s)`.
    pub g2_ts: Option<f64>,
    /// Occupation at the minimum.
    pub n_ts: f64,
    /// Conventional steady-state correlation at the same `(α, P0)`.
    pub g0_conventional: Option<f64>,
    /// Conventional steady-state occupation.
    pub n_conventional: f64,
    /// Truncation headroom held throughout the run.
    pub converged: bool,
}

/// Sweep output with its axis definitions. Points are stored row-major:
/// the nonlinearity axis is the slow index, the drive axis the fast one.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub kerr_axis: Vec<f64>,
    pub p0_axis: Vec<f64>,
    pub points: Vec<SweepPoint>,
}

/// Evaluate one sweep point: combined-drive window minimum plus the
/// conventional steady-state pair.
pub fn eval_sweep_point(base: &ScenarioConfig, kerr: f64, p0: f64) -> Result<SweepPoint> {
    let mut cfg = base.clone().with_measure_periods(1);
    cfg.mode = ModeParams::new(cfg.mode.energy, kerr)?;
    cfg.p0 = C64::new(p0, 0.0);

    let traj = run_time_trace(&cfg)?;
    let (a, b) = cfg.measure_window();
    let w = find_window_min(&traj, a, b)?;

    let space = cfg.space()?;
    let (g0, n_conv) = conventional_reference(&space, &cfg.mode, cfg.p0)?;

    Ok(SweepPoint {
        kerr,
        p0,
        t_s: w.t_s,
        g2_ts: Some(w.g2_min),
        n_ts: w.n_at_min,
        g0_conventional: g0,
        n_conventional: n_conv,
        converged: !traj.truncation_warning(),
    })
}

/// Sweep the continuous drive at fixed nonlinearity. Each point reads
/// out at its own correlation minimum within the measurement window.
pub fn run_occupation_sweep(base: &ScenarioConfig, p0_grid: &[f64]) -> Result<SweepResult> {
    if p0_grid.is_empty() {
        return Err(Error::InvalidArgument("empty drive grid".into()));
    }
    let kerr = base.mode.kerr;
    let results = exec::map_collect(p0_grid, |&p0| eval_sweep_point(base, kerr, p0));
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kerr_axis: vec![kerr],
        p0_axis: p0_grid.to_vec(),
        points,
    })
}

/// Sweep both the nonlinearity and the continuous drive.
pub fn run_regime_map(
    base: &ScenarioConfig,
    kerr_grid: &[f64],
    p0_grid: &[f64],
) -> Result<SweepResult> {
    if kerr_grid.is_empty() || p0_grid.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    let pairs: Vec<(f64, f64)> = kerr_grid
        .iter()
        .flat_map(|&a| p0_grid.iter().map(move |&p| (a, p)))
        .collect();
    let results = exec::map_collect(&pairs, |&(a, p)| eval_sweep_point(base, a, p));
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kerr_axis: kerr_grid.to_vec(),
        p0_axis: p0_grid.to_vec(),
        points,
    })
}

/// Two-time scan around the correlation minimum, with the conventional
/// continuous-drive baseline on the same grid.
#[derive(Debug, Clone)]
pub struct TwoTimeScan {
    pub window: WindowMin,
    /// Combined-drive `g₂(t, t_s)`.
    pub combined: TwoTimeResult,
    /// Conventional steady-state baseline on the same grid (stationary,
    /// so it depends only on `|t − t_s|`).
    pub conventional: TwoTimeResult,
}

/// Compute `g₂(t, t_s)` for `t` within `±half_width` of the correlation
/// minimum `t_s`, on a grid of spacing `grid_dt`.
///
/// Forward times propagate the regression operator from `t_s`; earlier
/// times use the exchange symmetry `g₂(t, t_s) = g₂(t_s, t)` and anchor a
/// regression run at each earlier time, so every value is produced by a
/// forward propagation.
pub fn run_two_time_scan(
    cfg: &ScenarioConfig,
    half_width: f64,
    grid_dt: f64,
) -> Result<TwoTimeScan> {
    cfg.validate()?;
    if !(half_width > 0.0) || !(grid_dt > 0.0) {
        return Err(Error::InvalidArgument(
            "half_width and grid_dt must be positive".into(),
        ));
    }
    let space = cfg.space()?;
    let schedule = cfg.schedule()?;
    let rho0 = DensityMatrix::vacuum(&space);

    let traj = run_time_trace(cfg)?;
    let (a, b) = cfg.measure_window();
    let window = find_window_min(&traj, a, b)?;
    let t_s = window.t_s;
    if t_s + half_width > cfg.horizon() {
        return Err(Error::RangeError(format!(
            "two-time scan escapes the horizon: t_s = {t_s}, half width = {half_width}"
        )));
    }

    let steps = (half_width / grid_dt).round() as i64;
    let times: Vec<f64> = (-steps..=steps).map(|k| t_s + k as f64 * grid_dt).collect();
    if times[0] < 0.0 {
        return Err(Error::RangeError(
            "two-time grid extends before the start of the run".into(),
        ));
    }

    // Forward branch, one regression run from t_s.
    let fwd_times: Vec<f64> = times.iter().copied().filter(|&t| t >= t_s).collect();
    let rho_ts = state_at(&space, &cfg.mode, &schedule, &rho0, t_s, &cfg.ode)?;
    let fwd = g2_two_time(
        &space, &cfg.mode, &schedule, &rho_ts, t_s, &fwd_times, half_width, &cfg.ode,
    )?;

    // Earlier branch: one checkpointed sweep to collect the anchor states,
    // then independent short regressions up to t_s.
    let early_times: Vec<f64> = times.iter().copied().filter(|&t| t < t_s).collect();
    let mut early_values: Vec<Option<f64>> = Vec::with_capacity(early_times.len());
    if !early_times.is_empty() {
        let mut anchors: Vec<DensityMatrix> = Vec::with_capacity(early_times.len());
        {
            let mut state = rho0.matrix().clone();
            dynamics::propagate(
                &space,
                &cfg.mode,
                &schedule,
                &mut state,
                0.0,
                &early_times,
                &cfg.ode,
                |_, _, mat| {
                    anchors.push(DensityMatrix::from_matrix_unchecked(mat.clone()));
                    Ok(())
                },
                |_, _, _| Ok(()),
            )?;
        }
        let tasks: Vec<(f64, DensityMatrix)> = early_times.iter().copied().zip(anchors).collect();
        let results = exec::map_collect(&tasks, |(t, rho_t)| -> Result<Option<f64>> {
            let res = g2_two_time(
                &space,
                &cfg.mode,
                &schedule,
                rho_t,
                *t,
                &[t_s],
                t_s - *t + grid_dt,
                &cfg.ode,
            )?;
            Ok(res.values[0])
        });
        for r in results {
            early_values.push(r?);
        }
    }

    let mut values: Vec<Option<f64>> = early_values;
    values.extend(fwd.values.iter().copied());
    let combined = TwoTimeResult {
        t_s,
        times: times.clone(),
        values,
        n_ts: fwd.n_ts,
    };

    // Conventional baseline: anchored in the steady state of the
    // continuous drive; stationarity mirrors the forward delays.
    let cont_sched = DriveSchedule::continuous(cfg.p0, cfg.period)?;
    let ss = steady_state_direct(&space, &cfg.mode, cfg.p0)?;
    let delays: Vec<f64> = (0..=steps).map(|k| t_s + k as f64 * grid_dt).collect();
    let base_fwd = g2_two_time(
        &space,
        &cfg.mode,
        &cont_sched,
        &ss,
        t_s,
        &delays,
        half_width,
        &cfg.ode,
    )?;
    let mut base_values: Vec<Option<f64>> = Vec::with_capacity(times.len());
    for k in (1..=steps).rev() {
        base_values.push(base_fwd.values[k as usize]);
    }
    base_values.extend(base_fwd.values.iter().copied());
    let conventional = TwoTimeResult {
        t_s,
        times,
        values: base_values,
        n_ts: base_fwd.n_ts,
    };

    Ok(TwoTimeScan {
        window,
        combined,
        conventional,
    })
}

/// Outcome of the settled-period integral check.
#[derive(Debug, Clone)]
pub struct CycleReport {
    pub t_start: f64,
    pub t_end: f64,
    /// Conventional steady-state correlation the period must return to.
    pub g0: f64,
    /// `g₂` just before the period-opening pulse.
    pub g2_start: f64,
    /// `g₂` just before the period-closing pulse.
    pub g2_end: f64,
    /// `g₂` right after the period-opening pulse (the displacement moves
    /// the correlation discontinuously; for a weakly nonclassical steady
    /// state the post-pulse value sits near one).
    pub post_pulse_g2: f64,
    /// `∫ f dt` over the period interior.
    pub period_integral: f64,
    pub max_abs_f: f64,
    /// `|∫f| / (max|f| · T)`.
    pub normalized_residual: f64,
    /// Worst pointwise error of `g₂(start⁺) + 4 P₀ ∫f` against the
    /// sampled `g₂`: the integral relation on the open inter-pulse
    /// interval, with the pulse jump carried by the displacement.
    pub pointwise_max_error: f64,
    /// Worst pointwise error when anchoring at the conventional `g₀`
    /// instead; differs from `pointwise_max_error` by the pulse jump.
    pub g0_anchored_max_error: f64,
    /// The running integral takes both signs inside the period.
    pub sign_change: bool,
}

impl CycleReport {
    /// Integral, reconstruction and period-end criteria. The sign-change
    /// observation is reported separately: it is expected for pulsed
    /// drives but meaningless for a flat continuous-only period.
    pub fn passes(&self) -> bool {
        self.normalized_residual < CYCLE_INTEGRAL_TOL
            && self.pointwise_max_error < CYCLE_POINTWISE_TOL
            && (self.g2_end - self.g0).abs() < CYCLE_END_TOL
    }
}

/// Check that the equal-time correlation closes a settled pulse period:
/// the interior integral of `f` vanishes, the running integral
/// reconstructs the correlation's evolution from its post-pulse value,
/// and `g₂` returns to `g₀` before the period-closing pulse.
///
/// `period_index` counts pulse periods (`m` means the period starting at
/// the pulse at `m·T`). The period must be settled: `g₂` just before the
/// opening pulse has to match the conventional `g₀`.
pub fn check_cycle_integral(
    space: &FockSpace,
    traj: &Trajectory,
    period_index: u32,
) -> Result<CycleReport> {
    let period = traj.schedule().period();
    let t_start = period_index as f64 * period;
    let t_end = t_start + period;
    let t_last = *traj.times().last().unwrap_or(&0.0);
    if period_index < 1 || t_end > t_last + 1e-9 {
        return Err(Error::RangeError(format!(
            "period {period_index} ([{t_start}, {t_end}]) not inside the trajectory"
        )));
    }

    let p0 = traj.schedule().p0();
    if p0.im != 0.0 {
        return Err(Error::UnsupportedConfiguration(
            "cycle check requires a real continuous drive".into(),
        ));
    }
    let (g0, _) = conventional_reference(space, traj.params(), p0)?;
    let g0 = g0.ok_or_else(|| {
        Error::UnsupportedConfiguration("conventional steady state has vanishing occupation".into())
    })?;

    // For a pulsed drive the period opens at a pulse and the settledness
    // gate reads the flagged pre-pulse record; a continuous-only
    // trajectory is already stationary, so the grid record serves.
    let start_record = traj
        .pre_pulse_at(t_start)
        .copied()
        .unwrap_or_else(|| traj.records()[traj.index_of_time(t_start)]);
    let g2_start = start_record
        .g2
        .ok_or_else(|| Error::NotSettled("correlation undefined at the period start".into()))?;
    if (g2_start - g0).abs() > CYCLE_SETTLED_TOL {
        return Err(Error::NotSettled(format!(
            "g2 before the opening pulse is {g2_start:.6}, conventional value {g0:.6}"
        )));
    }

    let i_start = traj.index_of_time(t_start);
    let i_end = traj.index_of_time(t_end);
    let dt = traj.sample_dt();
    let records = traj.records();

    // Interior trapezoid, excluding the pulse samples at both ends.
    let mut integral = 0.0;
    let mut max_abs_f = 0.0_f64;
    for k in (i_start + 1)..(i_end - 1) {
        let (Some(f0), Some(f1)) = (records[k].f, records[k + 1].f) else {
            return Err(Error::NotSettled("undefined f inside the period".into()));
        };
        integral += 0.5 * dt * (f0 + f1);
        max_abs_f = max_abs_f.max(f0.abs()).max(f1.abs());
    }
    let normalized_residual = if max_abs_f > 0.0 {
        integral.abs() / (max_abs_f * period)
    } else {
        0.0
    };

    // Running integral anchored at the post-pulse sample, reconstructing
    // the sampled correlation pointwise. Cumulative Simpson: the rate
    // function carries narrow field-cancellation spikes, and a running
    // trapezoid's accumulated error there would dominate the
    // reconstruction being tested.
    let f_vals: Vec<f64> = (i_start..=i_end)
        .map(|k| records[k].f)
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::NotSettled("undefined f inside the period".into()))?;
    let m = f_vals.len();
    let mut running = vec![0.0_f64; m];
    if m >= 3 {
        running[1] = dt * (5.0 * f_vals[0] + 8.0 * f_vals[1] - f_vals[2]) / 12.0;
        for k in 2..m {
            running[k] =
                running[k - 2] + dt / 3.0 * (f_vals[k - 2] + 4.0 * f_vals[k - 1] + f_vals[k]);
        }
    }
    let post_pulse_g2 = records[i_start]
        .g2
        .ok_or_else(|| Error::NotSettled("correlation undefined after the opening pulse".into()))?;
    let mut min_running = 0.0_f64;
    let mut max_running = 0.0_f64;
    let mut pointwise_max_error = 0.0_f64;
    let mut g0_anchored_max_error = 0.0_f64;
    for k in (i_start + 1)..i_end {
        let run_k = running[k - i_start];
        min_running = min_running.min(run_k);
        max_running = max_running.max(run_k);
        if let Some(g2_k) = records[k].g2 {
            let rec = post_pulse_g2 + 4.0 * p0.re * run_k;
            pointwise_max_error = pointwise_max_error.max((rec - g2_k).abs());
            let rec0 = g0 + 4.0 * p0.re * run_k;
            g0_anchored_max_error = g0_anchored_max_error.max((rec0 - g2_k).abs());
        }
    }

    let g2_end = traj
        .pre_pulse_at(t_end)
        .and_then(|r| r.g2)
        .or_else(|| records[i_end].g2)
        .ok_or_else(|| Error::NotSettled("correlation undefined at the period end".into()))?;

    Ok(CycleReport {
        t_start,
        t_end,
        g0,
        g2_start,
        g2_end,
        post_pulse_g2,
        period_integral: integral,
        max_abs_f,
        normalized_residual,
        pointwise_max_error,
        g0_anchored_max_error,
        sign_change: min_running < 0.0 && max_running > 0.0,
    })
}

/// One row of the finite-pulse robustness scan.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPoint {
    pub sigma: f64,
    pub g2_min: f64,
    pub n_at_min: f64,
    pub t_s: f64,
    pub converged: bool,
}

/// Result of replacing the instantaneous pulses with area-matched
/// Gaussians of increasing width.
#[derive(Debug, Clone)]
pub struct GaussianRobustness {
    /// Instantaneous-pulse reference minimum.
    pub delta_g2_min: f64,
    /// Conventional steady-state correlation.
    pub g0: f64,
    pub points: Vec<GaussianPoint>,
}

/// Rerun the scenario with Gaussian pulses over `sigma_grid`, recording
/// the correlation minimum per width.
pub fn gaussian_robustness(cfg: &ScenarioConfig, sigma_grid: &[f64]) -> Result<GaussianRobustness> {
    if sigma_grid.is_empty() || sigma_grid.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument(
            "sigma grid must be non-empty and positive".into(),
        ));
    }
    let delta_cfg = cfg.clone().with_measure_periods(1);
    let traj = run_time_trace(&delta_cfg)?;
    let (a, b) = delta_cfg.measure_window();
    let delta_min = find_window_min(&traj, a, b)?;

    let space = cfg.space()?;
    let (g0, _) = conventional_reference(&space, &cfg.mode, cfg.p0)?;
    let g0 = g0.ok_or_else(|| {
        Error::UnsupportedConfiguration("conventional steady state has vanishing occupation".into())
    })?;

    let sigmas: Vec<f64> = sigma_grid.to_vec();
    let results = exec::map_collect(&sigmas, |&sigma| -> Result<GaussianPoint> {
        let mut gcfg = cfg.clone().with_measure_periods(1);
        gcfg.shape = PulseShape::Gaussian { sigma };
        let traj = run_time_trace(&gcfg)?;
        let (a, b) = gcfg.measure_window();
        let w = find_window_min(&traj, a, b)?;
        Ok(GaussianPoint {
            sigma,
            g2_min: w.g2_min,
            n_at_min: w.n_at_min,
            t_s: w.t_s,
            converged: !traj.truncation_warning(),
        })
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(GaussianRobustness {
        delta_g2_min: delta_min.g2_min,
        g0,
        points,
    })
}

/// Scalars extracted from one rung of a truncation ladder.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceEntry {
    pub dim: usize,
    pub g2_min: f64,
    pub n_at_min: f64,
    pub truncation_warning: bool,
}

/// Truncation-convergence report over a ladder of space sizes.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub entries: Vec<ConvergenceEntry>,
    /// Successive absolute differences `(Δ g2_min, Δ n_at_min)`.
    pub diffs: Vec<(f64, f64)>,
    /// The two largest spaces agree within [`CONVERGENCE_TOL`].
    pub pass: bool,
}

/// Rerun the scenario's window minimum on each space size of the ladder
/// and compare successive scalars.
pub fn convergence_check(cfg: &ScenarioConfig, dims: &[usize]) -> Result<ConvergenceReport> {
    if dims.len() < 2 {
        return Err(Error::InvalidArgument(
            "convergence ladder needs at least two space sizes".into(),
        ));
    }
    if dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "convergence ladder must be strictly increasing".into(),
        ));
    }
    let dims_owned: Vec<usize> = dims.to_vec();
    let results = exec::map_collect(&dims_owned, |&dim| -> Result<ConvergenceEntry> {
        let cfg_d = cfg.clone().with_dim(dim).with_measure_periods(1);
        let traj = run_time_trace(&cfg_d)?;
        let (a, b) = cfg_d.measure_window();
        let w = find_window_min(&traj, a, b)?;
        Ok(ConvergenceEntry {
            dim,
            g2_min: w.g2_min,
            n_at_min: w.n_at_min,
            truncation_warning: traj.truncation_warning(),
        })
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    let diffs: Vec<(f64, f64)> = entries
        .windows(2)
        .map(|w| {
            (
                (w[1].g2_min - w[0].g2_min).abs(),
                (w[1].n_at_min - w[0].n_at_min).abs(),
            )
        })
        .collect();
    let pass = diffs
        .last()
        .map(|&(dg, dn)| dg < CONVERGENCE_TOL && dn < CONVERGENCE_TOL)
        .unwrap_or(false);
    Ok(ConvergenceReport {
        entries,
        diffs,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn drive_variants_toggle_the_right_knobs() {
        let cfg = presets::weak_drive_comparison();
        let cont = DriveVariant::Continuous.apply(&cfg);
        assert_eq!(cont.p1, C64::new(0.0, 0.0));
        assert_eq!(cont.p0, cfg.p0);
        let pulses = DriveVariant::PulsesOnly.apply(&cfg);
        assert_eq!(pulses.p0, C64::new(0.0, 0.0));
        assert_eq!(pulses.p1, cfg.p1);
    }

    #[test]
    fn schedule_covers_the_horizon() {
        let cfg = presets::weak_drive_comparison();
        let schedule = cfg.schedule().unwrap();
        assert_eq!(
            schedule.pulse_count(),
            (cfg.warmup_periods + cfg.measure_periods) as usize
        );
        let last = schedule.pulses().last().unwrap().time;
        assert!((last - cfg.horizon()).abs() < 1e-12);
    }

    #[test]
    fn sweeps_reject_empty_grids() {
        let cfg = presets::weak_occupation_base();
        assert!(run_occupation_sweep(&cfg, &[]).is_err());
        assert!(run_regime_map(&cfg, &[], &[0.5]).is_err());
    }

    #[test]
    fn linear_mode_sweep_point_is_poissonian() {
        // α = 0: both the windowed minimum and the conventional value sit
        // at the coherent-state unity. The window min picks out the most
        // numerically depressed sample, so integrate tightly.
        let mut cfg = presets::weak_occupation_base();
        cfg.sample_dt = 0.05;
        cfg.ode.rtol = 1e-11;
        cfg.ode.atol = 1e-14;
        let point = eval_sweep_point(&cfg, 0.0, 0.4).unwrap();
        let g2 = point.g2_ts.unwrap();
        let g0 = point.g0_conventional.unwrap();
        assert!((g2 - 1.0).abs() < 1e-6, "g2 = {g2}");
        assert!((g0 - 1.0).abs() < 1e-9, "g0 = {g0}");
        assert!(point.converged);
    }

    #[test]
    fn single_point_sweep_matches_trace_composition() {
        let mut base = presets::strong_enhancement();
        base.sample_dt = 0.05;
        let sweep = run_occupation_sweep(&base, &[0.5]).unwrap();
        assert_eq!(sweep.points.len(), 1);

        let cfg = base.clone().with_measure_periods(1);
        let traj = run_time_trace(&cfg).unwrap();
        let (a, b) = cfg.measure_window();
        let w = find_window_min(&traj, a, b).unwrap();
        let p = &sweep.points[0];
        assert_eq!(p.t_s, w.t_s);
        assert_eq!(p.g2_ts.unwrap(), w.g2_min);
        assert_eq!(p.n_ts, w.n_at_min);
    }
}
