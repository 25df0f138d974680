//! Master-equation dynamics of the driven-dissipative Kerr mode.
//!
//! The density matrix evolves in the Schrödinger picture,
//!
//! ```text
//! dρ/dt = −i[H, ρ] + (γ/2)(2 a ρ a† − a†a ρ − ρ a†a),   ħ = γ = 1,
//! ```
//!
//! with `H = E a†a + α a†a†aa + P(t) a† + P*(t) a`. The drive combines a
//! continuous amplitude with a train of pulses: instantaneous pulses act
//! as exact displacement unitaries at their scheduled times, finite-width
//! Gaussian pulses are folded into the time-dependent Hamiltonian.
//! Between events the state is advanced by the adaptive stepper in
//! [`crate::ode`], with steps clamped to land exactly on sample and pulse
//! times.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::fock::{expectation_raw, FockSpace, Operator};
use crate::linalg;
use crate::observables::{ObservableOps, ObservableRecord};
use crate::ode::{self, OdeOptions};
use crate::{Error, Result};

/// Tolerance on `|tr ρ − 1|` for a valid density matrix.
pub const TRACE_TOL: f64 = 1e-8;
/// Tolerance on the max-norm of `ρ − ρ†`.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Eigenvalues of ρ may dip this far below zero (integrator tolerance).
pub const POSITIVITY_FLOOR: f64 = -1e-7;
/// Combined population allowed in the top two retained Fock levels
/// before a truncation warning is raised.
pub const HEADROOM_TOL: f64 = 1e-8;

/// Gaussian pulses are cut off at this many standard deviations.
pub const GAUSSIAN_CUTOFF_SIGMAS: f64 = 6.0;

/// Mode parameters in units of the decay rate (`γ = 1` internally).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    /// Mode energy relative to the drive (rotating frame), units of γ.
    pub energy: f64,
    /// Kerr nonlinearity strength, units of γ.
    pub kerr: f64,
}

impl ModeParams {
    pub fn new(energy: f64, kerr: f64) -> Result<Self> {
        if !energy.is_finite() || !kerr.is_finite() {
            return Err(Error::InvalidArgument(
                "mode parameters must be finite".into(),
            ));
        }
        if kerr < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "kerr strength must be non-negative, got {kerr}"
            )));
        }
        Ok(Self { energy, kerr })
    }

    /// Decay rate; fixed by the choice of units.
    pub const fn gamma(&self) -> f64 {
        1.0
    }
}

/// Temporal profile of one pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseShape {
    /// Instantaneous pulse, realized as an exact displacement unitary.
    Delta,
    /// Gaussian envelope `exp(−(t−t₀)²/2σ²)/(σ√2π)`, area-normalized so
    /// the σ→0 limit recovers the instantaneous pulse.
    Gaussian { sigma: f64 },
}

/// One scheduled pulse. `amplitude` is the time-integrated pulse area in
/// units of γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEvent {
    pub time: f64,
    pub amplitude: C64,
    pub shape: PulseShape,
}

impl PulseEvent {
    fn validate(&self) -> Result<()> {
        if !self.time.is_finite()
            || !self.amplitude.re.is_finite()
            || !self.amplitude.im.is_finite()
        {
            return Err(Error::InvalidArgument("pulse fields must be finite".into()));
        }
        if let PulseShape::Gaussian { sigma } = self.shape {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "gaussian pulse width must be positive, got {sigma}"
                )));
            }
        }
        Ok(())
    }
}

/// Drive configuration: continuous amplitude plus an ordered pulse train.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSchedule {
    p0: C64,
    period: f64,
    pulses: Vec<PulseEvent>,
}

impl DriveSchedule {
    pub fn new(p0: C64, period: f64, pulses: Vec<PulseEvent>) -> Result<Self> {
        if !p0.re.is_finite() || !p0.im.is_finite() {
            return Err(Error::InvalidArgument(
                "continuous amplitude must be finite".into(),
            ));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pulse period must be positive, got {period}"
            )));
        }
        for p in &pulses {
            p.validate()?;
        }
        if pulses.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::InvalidArgument(
                "pulse times must be strictly increasing".into(),
            ));
        }
        Ok(Self { p0, period, pulses })
    }

    /// Continuous drive only.
    pub fn continuous(p0: C64, period: f64) -> Result<Self> {
        Self::new(p0, period, Vec::new())
    }

    /// Continuous drive plus `count` equal pulses at `period, 2·period, …`.
    pub fn pulse_train(
        p0: C64,
        amplitude: C64,
        period: f64,
        count: usize,
        shape: PulseShape,
    ) -> Result<Self> {
        let pulses = (1..=count)
            .map(|m| PulseEvent {
                time: m as f64 * period,
                amplitude,
                shape,
            })
            .collect();
        Self::new(p0, period, pulses)
    }

    pub fn p0(&self) -> C64 {
        self.p0
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn pulses(&self) -> &[PulseEvent] {
        &self.pulses
    }

    pub fn pulse_count(&self) -> usize {
        self.pulses.len()
    }

    /// True when every drive amplitude is real.
    pub fn is_real(&self) -> bool {
        self.p0.im == 0.0 && self.pulses.iter().all(|p| p.amplitude.im == 0.0)
    }

    /// Smooth part of the drive at `t`: the continuous amplitude plus any
    /// active Gaussian envelopes. Instantaneous pulses do not contribute.
    pub fn smooth_amplitude(&self, t: f64) -> C64 {
        let mut p = self.p0;
        for pulse in &self.pulses {
            if let PulseShape::Gaussian { sigma } = pulse.shape {
                let dt = t - pulse.time;
                if dt.abs() <= GAUSSIAN_CUTOFF_SIGMAS * sigma {
                    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                    p += pulse.amplitude
                        * C64::from(norm * (-dt * dt / (2.0 * sigma * sigma)).exp());
                }
            }
        }
        p
    }

    /// Instantaneous pulses with times in the half-open interval `(t0, t1]`.
    fn delta_pulses_in(&self, t0: f64, t1: f64) -> Vec<(f64, C64)> {
        self.pulses
            .iter()
            .filter(|p| matches!(p.shape, PulseShape::Delta) && p.time > t0 && p.time <= t1)
            .map(|p| (p.time, p.amplitude))
            .collect()
    }

    /// Edges of Gaussian-pulse support intersecting `(t0, t1)`, used to
    /// split integration segments.
    fn gaussian_edges_in(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut edges = Vec::new();
        for p in &self.pulses {
            if let PulseShape::Gaussian { sigma } = p.shape {
                for e in [
                    p.time - GAUSSIAN_CUTOFF_SIGMAS * sigma,
                    p.time + GAUSSIAN_CUTOFF_SIGMAS * sigma,
                ] {
                    if e > t0 && e < t1 {
                        edges.push(e);
                    }
                }
            }
        }
        edges
    }

    /// Narrowest Gaussian width whose support intersects `(t0, t1)`.
    fn min_active_sigma(&self, t0: f64, t1: f64) -> Option<f64> {
        let mut min_sigma: Option<f64> = None;
        for p in &self.pulses {
            if let PulseShape::Gaussian { sigma } = p.shape {
                let lo = p.time - GAUSSIAN_CUTOFF_SIGMAS * sigma;
                let hi = p.time + GAUSSIAN_CUTOFF_SIGMAS * sigma;
                if hi > t0 && lo < t1 {
                    min_sigma = Some(min_sigma.map_or(sigma, |m: f64| m.min(sigma)));
                }
            }
        }
        min_sigma
    }
}

/// Unit-trace Hermitian state of the mode.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: Array2<C64>,
    truncation_warning: bool,
}

impl DensityMatrix {
    /// Vacuum state `|0⟩⟨0|`.
    pub fn vacuum(space: &FockSpace) -> Self {
        let mut mat = Array2::<C64>::zeros((space.dim(), space.dim()));
        mat[(0, 0)] = C64::new(1.0, 0.0);
        Self {
            mat,
            truncation_warning: false,
        }
    }

    /// Number state `|n⟩⟨n|`.
    pub fn number_state(space: &FockSpace, n: usize) -> Result<Self> {
        let ket = space.number_ket(n)?;
        Ok(Self::from_ket(&ket))
    }

    /// Coherent state with amplitude `beta`.
    pub fn coherent(space: &FockSpace, beta: C64) -> Self {
        Self::from_ket(&space.coherent_ket(beta))
    }

    /// Pure state `|ψ⟩⟨ψ|` from a ket (assumed normalized).
    pub fn from_ket(ket: &Array1<C64>) -> Self {
        let d = ket.len();
        let mut mat = Array2::<C64>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                mat[(i, j)] = ket[i] * ket[j].conj();
            }
        }
        Self {
            mat,
            truncation_warning: false,
        }
    }

    // Internal wrapper for matrices produced by validated evolution paths.
    pub(crate) fn from_matrix_unchecked(mat: Array2<C64>) -> Self {
        Self {
            mat,
            truncation_warning: false,
        }
    }

    /// Wrap a raw matrix, validating the density-matrix invariants.
    pub fn from_matrix(mat: Array2<C64>) -> Result<Self> {
        let dm = Self {
            mat,
            truncation_warning: false,
        };
        if let Some(problem) = dm.invariant_violation() {
            return Err(Error::InvalidArgument(format!(
                "matrix is not a valid density matrix: {problem}"
            )));
        }
        Ok(dm)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.mat
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.mat)
    }

    /// Max-norm of `ρ − ρ†`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut dev = 0.0_f64;
        for i in 0..d {
            for j in i..d {
                dev = dev.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let w = linalg::eigvalsh(&self.mat);
        w[0]
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += (self.mat[(i, j)] * self.mat[(j, i)]).re;
            }
        }
        acc
    }

    /// Expectation value `tr(op · ρ)`.
    pub fn expect(&self, op: &Operator) -> Result<C64> {
        expectation_raw(op, &self.mat)
    }

    /// Population in the top two retained levels.
    pub fn top_two_population(&self) -> f64 {
        let d = self.dim();
        self.mat[(d - 1, d - 1)].re + self.mat[(d - 2, d - 2)].re
    }

    pub fn truncation_warning(&self) -> bool {
        self.truncation_warning
    }

    pub fn set_truncation_warning(&mut self, flag: bool) {
        self.truncation_warning = flag;
    }

    /// Trace distance to another state.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        linalg::trace_distance(&self.mat, &other.mat)
    }

    /// First violated invariant, if any.
    pub fn invariant_violation(&self) -> Option<String> {
        if self.mat.nrows() != self.mat.ncols() {
            return Some("matrix is not square".into());
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Some(format!(
                "trace deviates from one by {:.3e}",
                (tr - C64::from(1.0)).norm()
            ));
        }
        let herm = self.hermiticity_deviation();
        if herm > HERMITICITY_TOL {
            return Some(format!("hermiticity deviation {herm:.3e}"));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < POSITIVITY_FLOOR {
            return Some(format!("negative eigenvalue {min_eig:.3e}"));
        }
        None
    }
}

/// Hamiltonian `E a†a + α a†a†aa + P a† + P* a` for drive amplitude `p`.
pub fn hamiltonian(space: &FockSpace, params: &ModeParams, p: C64) -> Result<Operator> {
    if !p.re.is_finite() || !p.im.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "drive amplitude must be finite, got {p}"
        )));
    }
    let mut h = space.number().mapv(|z| z * C64::from(params.energy))
        + space.pair().mapv(|z| z * C64::from(params.kerr));
    h = h + space.create().mapv(|z| z * p) + space.annihilate().mapv(|z| z * p.conj());
    Ok(h)
}

/// Lindblad generator applied to a raw matrix (hot path, no validation).
///
/// The dissipator exploits the ladder structure: `(aρa†)[i,j] =
/// √((i+1)(j+1)) ρ[i+1,j+1]` and `a†a` is diagonal, so only the
/// commutator costs matrix products.
pub(crate) fn lindblad_rhs_raw(h: &Operator, rho: &Array2<C64>) -> Array2<C64> {
    let d = rho.nrows();
    let comm = h.dot(rho) - rho.dot(h);
    let mut out = comm.mapv(|z| z * C64::new(0.0, -1.0));
    for i in 0..d {
        for j in 0..d {
            let mut v = rho[(i, j)] * C64::from(-0.5 * (i + j) as f64);
            if i + 1 < d && j + 1 < d {
                let w = (((i + 1) * (j + 1)) as f64).sqrt();
                v += rho[(i + 1, j + 1)] * C64::from(w);
            }
            out[(i, j)] += v;
        }
    }
    out
}

/// Lindblad generator applied to a density matrix.
pub fn lindblad_rhs(space: &FockSpace, rho: &DensityMatrix, h: &Operator) -> Result<Array2<C64>> {
    if h.nrows() != space.dim() || rho.dim() != space.dim() {
        return Err(Error::DimensionMismatch(h.nrows(), rho.dim()));
    }
    Ok(lindblad_rhs_raw(h, rho.matrix()))
}

/// Apply an instantaneous pulse of area `p1`: `ρ → D ρ D†` with
/// `D = D(−i p1)`. Raises the truncation warning if the post-pulse
/// population in the top two levels exceeds [`HEADROOM_TOL`].
pub fn apply_delta_pulse(space: &FockSpace, rho: &DensityMatrix, p1: C64) -> Result<DensityMatrix> {
    if rho.dim() != space.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), space.dim()));
    }
    if p1 == C64::new(0.0, 0.0) {
        return Ok(rho.clone());
    }
    let d = space.displacement(C64::new(0.0, -1.0) * p1)?;
    let mat = d.dot(rho.matrix()).dot(&linalg::dagger(&d));
    let mut out = DensityMatrix {
        mat,
        truncation_warning: rho.truncation_warning,
    };
    if out.top_two_population() >= HEADROOM_TOL {
        out.truncation_warning = true;
    }
    Ok(out)
}

/// Observable record taken just before a pulse was applied.
#[derive(Debug, Clone)]
pub struct PrePulseRecord {
    pub record: ObservableRecord,
}

/// Time series of observables produced by [`evolve`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    records: Vec<ObservableRecord>,
    pre_pulse: Vec<PrePulseRecord>,
    params: ModeParams,
    schedule: DriveSchedule,
    sample_dt: f64,
    truncation_warning: bool,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn records(&self) -> &[ObservableRecord] {
        &self.records
    }

    /// Records captured just before each pulse (the grid itself stores the
    /// post-pulse state at pulse times).
    pub fn pre_pulse_records(&self) -> &[PrePulseRecord] {
        &self.pre_pulse
    }

    pub fn pre_pulse_at(&self, t: f64) -> Option<&ObservableRecord> {
        self.pre_pulse
            .iter()
            .map(|p| &p.record)
            .find(|r| (r.t - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    pub fn params(&self) -> &ModeParams {
        &self.params
    }

    pub fn schedule(&self) -> &DriveSchedule {
        &self.schedule
    }

    pub fn sample_dt(&self) -> f64 {
        self.sample_dt
    }

    pub fn truncation_warning(&self) -> bool {
        self.truncation_warning
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Grid index of the sample nearest to `t`.
    pub fn index_of_time(&self, t: f64) -> usize {
        let idx = (t / self.sample_dt).round() as isize;
        idx.clamp(0, self.records.len() as isize - 1) as usize
    }

    /// Records with sample times inside `[a, b]` (inclusive).
    pub fn window(&self, a: f64, b: f64) -> &[ObservableRecord] {
        let eps = 1e-9 * b.abs().max(1.0);
        let lo = self.times.partition_point(|&t| t < a - eps);
        let hi = self.times.partition_point(|&t| t <= b + eps);
        &self.records[lo..hi]
    }
}

/// Options for [`evolve`].
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub t_end: f64,
    pub sample_dt: f64,
    pub ode: OdeOptions,
    /// Check positivity every this many samples (0 = pick automatically,
    /// about 64 checks per run).
    pub positivity_stride: usize,
}

impl EvolveOptions {
    pub fn new(t_end: f64, sample_dt: f64) -> Self {
        Self {
            t_end,
            sample_dt,
            ode: OdeOptions::default(),
            positivity_stride: 0,
        }
    }
}

// Internal stop along the integration: sample point, pulse, or a segment
// split at a Gaussian support edge.
struct Stop {
    t: f64,
    sample_idx: Option<usize>,
    pulse_amp: Option<C64>,
}

fn merge_stops(samples: &[f64], pulses: &[(f64, C64)], edges: &[f64]) -> Vec<Stop> {
    let mut stops: Vec<Stop> = samples
        .iter()
        .enumerate()
        .map(|(i, &t)| Stop {
            t,
            sample_idx: Some(i),
            pulse_amp: None,
        })
        .collect();
    let eps = |t: f64| 1e-9 * t.abs().max(1.0);
    for &(t, amp) in pulses {
        match stops.iter_mut().find(|s| (s.t - t).abs() <= eps(t)) {
            Some(s) => s.pulse_amp = Some(amp),
            None => stops.push(Stop {
                t,
                sample_idx: None,
                pulse_amp: Some(amp),
            }),
        }
    }
    for &t in edges {
        if !stops.iter().any(|s| (s.t - t).abs() <= eps(t)) {
            stops.push(Stop {
                t,
                sample_idx: None,
                pulse_amp: None,
            });
        }
    }
    stops.sort_by(|a, b| a.t.total_cmp(&b.t));
    stops
}

// Shared propagation engine: advances a matrix (density matrix or
// regression operator) through the drive schedule, applying instantaneous
// pulses as displacement sandwiches and calling back at sample points.
pub(crate) fn propagate<FS, FP>(
    space: &FockSpace,
    params: &ModeParams,
    schedule: &DriveSchedule,
    state: &mut Array2<C64>,
    t_start: f64,
    samples: &[f64],
    ode_opts: &OdeOptions,
    mut on_sample: FS,
    mut on_pulse: FP,
) -> Result<bool>
where
    FS: FnMut(usize, f64, &Array2<C64>) -> Result<()>,
    FP: FnMut(f64, &Array2<C64>, &Array2<C64>) -> Result<()>,
{
    let Some(&t_end) = samples.last() else {
        return Ok(false);
    };
    if samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "sample times must be strictly increasing".into(),
        ));
    }
    if samples[0] < t_start - 1e-9 * t_start.abs().max(1.0) {
        return Err(Error::RangeError(format!(
            "first sample {} precedes start time {}",
            samples[0], t_start
        )));
    }

    let h0 = space.number().mapv(|z| z * C64::from(params.energy))
        + space.pair().mapv(|z| z * C64::from(params.kerr));
    let a_dag = space.create().clone();
    let a_op = space.annihilate().clone();
    let sched = schedule.clone();
    let rhs = move |t: f64, y: &Array2<C64>| {
        let p = sched.smooth_amplitude(t);
        let h = &h0 + &a_dag.mapv(|z| z * p) + a_op.mapv(|z| z * p.conj());
        lindblad_rhs_raw(&h, y)
    };

    let pulses = schedule.delta_pulses_in(t_start, t_end);
    let edges = schedule.gaussian_edges_in(t_start, t_end);
    let stops = merge_stops(samples, &pulses, &edges);

    let mut displacement_cache: Vec<(C64, Operator)> = Vec::new();
    let mut truncation_warning = false;
    let mut t = t_start;
    for stop in &stops {
        let eps = 1e-12 * stop.t.abs().max(1.0);
        if stop.t > t + eps {
            let mut opts = *ode_opts;
            if let Some(sigma) = schedule.min_active_sigma(t, stop.t) {
                opts.h_max = opts.h_max.min(sigma / 2.0);
            }
            ode::integrate(&rhs, state, t, stop.t, &opts)?;
        }
        t = stop.t;
        if let Some(amp) = stop.pulse_amp {
            let disp = match displacement_cache.iter().find(|(a, _)| *a == amp) {
                Some((_, d)) => d.clone(),
                None => {
                    let d = space.displacement(C64::new(0.0, -1.0) * amp)?;
                    displacement_cache.push((amp, d.clone()));
                    d
                }
            };
            let pre = state.clone();
            *state = disp.dot(state).dot(&linalg::dagger(&disp));
            on_pulse(t, &pre, state)?;
            let d = state.nrows();
            let top_two = state[(d - 1, d - 1)].re + state[(d - 2, d - 2)].re;
            if top_two >= HEADROOM_TOL {
                truncation_warning = true;
            }
        }
        if let Some(idx) = stop.sample_idx {
            on_sample(idx, t, state)?;
        }
    }
    Ok(truncation_warning)
}

/// Evolve `rho0` through the drive schedule, recording observables on a
/// uniform sample grid.
///
/// At a pulse time the grid stores the post-pulse state; the pre-pulse
/// record is additionally kept in [`Trajectory::pre_pulse_records`].
pub fn evolve(
    space: &FockSpace,
    params: &ModeParams,
    schedule: &DriveSchedule,
    rho0: &DensityMatrix,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if !(opts.sample_dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample_dt must be positive, got {}",
            opts.sample_dt
        )));
    }
    if !(opts.t_end > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_end must be positive, got {}",
            opts.t_end
        )));
    }
    if rho0.dim() != space.dim() {
        return Err(Error::DimensionMismatch(rho0.dim(), space.dim()));
    }

    // Largest grid multiple that still fits in [0, t_end].
    let steps_f = opts.t_end / opts.sample_dt;
    let n_steps = if (steps_f - steps_f.round()).abs() < 1e-9 * steps_f.max(1.0) {
        steps_f.round() as usize
    } else {
        steps_f.floor() as usize
    };
    let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * opts.sample_dt).collect();

    let ops = ObservableOps::new(space);
    let stride = if opts.positivity_stride == 0 {
        (times.len() / 64).max(1)
    } else {
        opts.positivity_stride
    };

    let mut records: Vec<ObservableRecord> = Vec::with_capacity(times.len());
    let mut pre_pulse: Vec<PrePulseRecord> = Vec::new();
    let mut headroom_warning = rho0.truncation_warning();
    let mut state = rho0.matrix().clone();

    // Sample at t = 0 before any propagation.
    records.push(ops.record(0.0, &state, false));

    let check_invariants = |t: f64, mat: &Array2<C64>, check_pos: bool| -> Result<()> {
        let tr = linalg::trace(mat);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::IntegratorFailure {
                t,
                reason: format!("trace deviation {:.3e}", (tr - C64::from(1.0)).norm()),
            });
        }
        let d = mat.nrows();
        let mut herm = 0.0_f64;
        for i in 0..d {
            for j in i..d {
                herm = herm.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        if herm > HERMITICITY_TOL {
            return Err(Error::IntegratorFailure {
                t,
                reason: format!("hermiticity deviation {herm:.3e}"),
            });
        }
        if check_pos {
            let min_eig = linalg::eigvalsh(mat)[0];
            if min_eig < POSITIVITY_FLOOR {
                return Err(Error::IntegratorFailure {
                    t,
                    reason: format!("negative eigenvalue {min_eig:.3e}"),
                });
            }
        }
        Ok(())
    };

    if times.len() > 1 {
        let sample_times = &times[1..];
        let warn = propagate(
            space,
            params,
            schedule,
            &mut state,
            0.0,
            sample_times,
            &opts.ode,
            |idx, t, mat| {
                let at_pulse = schedule.pulses().iter().any(|p| {
                    matches!(p.shape, PulseShape::Delta) && (p.time - t).abs() <= 1e-9 * t.max(1.0)
                });
                records.push(ops.record(t, mat, at_pulse));
                let d = mat.nrows();
                if mat[(d - 1, d - 1)].re + mat[(d - 2, d - 2)].re >= HEADROOM_TOL {
                    headroom_warning = true;
                }
                check_invariants(t, mat, (idx + 1) % stride == 0)
            },
            |t, pre, _post| {
                pre_pulse.push(PrePulseRecord {
                    record: ops.record(t, pre, true),
                });
                Ok(())
            },
        )?;
        headroom_warning |= warn;
    }

    Ok(Trajectory {
        times,
        records,
        pre_pulse,
        params: *params,
        schedule: schedule.clone(),
        sample_dt: opts.sample_dt,
        truncation_warning: headroom_warning,
    })
}

/// State of the system at time `t`, reached by evolving `rho0` through the
/// schedule (post-pulse if `t` is a pulse time).
pub fn state_at(
    space: &FockSpace,
    params: &ModeParams,
    schedule: &DriveSchedule,
    rho0: &DensityMatrix,
    t: f64,
    ode_opts: &OdeOptions,
) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be non-negative, got {t}"
        )));
    }
    let mut state = rho0.matrix().clone();
    let mut warning = rho0.truncation_warning();
    if t > 0.0 {
        let warn = propagate(
            space,
            params,
            schedule,
            &mut state,
            0.0,
            &[t],
            ode_opts,
            |_, _, _| Ok(()),
            |_, _, _| Ok(()),
        )?;
        warning |= warn;
    }
    let mut dm = DensityMatrix {
        mat: state,
        truncation_warning: false,
    };
    dm.set_truncation_warning(warning);
    Ok(dm)
}

/// Column-stacked vectorization of a matrix.
pub fn vectorize(mat: &Array2<C64>) -> Array1<C64> {
    let d = mat.nrows();
    let mut v = Array1::<C64>::zeros(d * d);
    for j in 0..d {
        for i in 0..d {
            v[j * d + i] = mat[(i, j)];
        }
    }
    v
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &Array1<C64>, d: usize) -> Array2<C64> {
    let mut mat = Array2::<C64>::zeros((d, d));
    for j in 0..d {
        for i in 0..d {
            mat[(i, j)] = v[j * d + i];
        }
    }
    mat
}

/// Dense matrix of the vectorized Lindblad generator for Hamiltonian `h`,
/// acting on column-stacked density matrices.
pub fn liouvillian_matrix(space: &FockSpace, h: &Operator) -> Array2<C64> {
    let d = space.dim();
    let id = linalg::eye(d);
    let a = space.annihilate();
    let n_op = space.number();
    let minus_i = C64::new(0.0, -1.0);

    let ht = h.t().to_owned();
    let nt = n_op.t().to_owned();
    let a_conj = a.mapv(|z| z.conj());

    let mut l = linalg::kron(&id, h).mapv(|z| z * minus_i);
    l = l + linalg::kron(&ht, &id).mapv(|z| z * (-minus_i));
    l = l + linalg::kron(&a_conj, a);
    l = l + linalg::kron(&id, n_op).mapv(|z| z * C64::from(-0.5));
    l = l + linalg::kron(&nt, &id).mapv(|z| z * C64::from(-0.5));
    l
}

/// Steady state of the continuously driven mode, by null space of the
/// vectorized generator with the trace constraint replacing one row.
pub fn steady_state_direct(
    space: &FockSpace,
    params: &ModeParams,
    p0: C64,
) -> Result<DensityMatrix> {
    let h = hamiltonian(space, params, p0)?;
    let d = space.dim();
    let d2 = d * d;
    let mut a = liouvillian_matrix(space, &h);
    // Trace row: Σ_i ρ_ii = 1 replaces the first equation.
    for col in 0..d2 {
        a[(0, col)] = C64::new(0.0, 0.0);
    }
    for i in 0..d {
        a[(0, i * d + i)] = C64::new(1.0, 0.0);
    }
    let mut b = Array1::<C64>::zeros(d2);
    b[0] = C64::new(1.0, 0.0);

    let x = linalg::lu_solve(&a, &b).map_err(|e| match e {
        Error::SingularMatrix => Error::DegenerateSteadyState(
            "vectorized generator is singular after the trace constraint".into(),
        ),
        other => other,
    })?;

    let raw = unvectorize(&x, d);
    let mut mat = linalg::hermitize(&raw);
    let tr = linalg::trace(&mat);
    mat = mat.mapv(|z| z / tr);

    // The constrained solve must return a genuine fixed point.
    let resid = linalg::max_abs(&lindblad_rhs_raw(&h, &mat));
    if resid > 1e-8 * (1.0 + linalg::max_abs(&h)) {
        return Err(Error::DegenerateSteadyState(format!(
            "fixed-point residual {resid:.3e} (null space larger than expected?)"
        )));
    }

    let dm = DensityMatrix {
        mat,
        truncation_warning: false,
    };
    if let Some(problem) = dm.invariant_violation() {
        return Err(Error::DegenerateSteadyState(format!(
            "steady-state solution violates invariants: {problem}"
        )));
    }
    Ok(dm)
}

/// Steady state by long-time evolution from vacuum: integrates until
/// states sampled one unit of time apart differ by less than `tol` in
/// trace distance, or errors out at `t_cap`.
pub fn steady_state_by_evolution(
    space: &FockSpace,
    params: &ModeParams,
    p0: C64,
    tol: f64,
    t_cap: f64,
) -> Result<DensityMatrix> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let h = hamiltonian(space, params, p0)?;
    let rhs = |_t: f64, y: &Array2<C64>| lindblad_rhs_raw(&h, y);
    // The integrator noise floor must sit well below the convergence
    // tolerance, or successive snapshots never stop differing.
    let mut ode_opts = OdeOptions::default();
    ode_opts.rtol = ode_opts.rtol.min(tol * 1e-2).max(1e-12);
    ode_opts.atol = ode_opts.rtol * 1e-2;

    let mut state = DensityMatrix::vacuum(space).into_matrix();
    let mut t = 0.0;
    let chunk = 1.0;
    while t < t_cap {
        let prev = state.clone();
        ode::integrate(&rhs, &mut state, t, t + chunk, &ode_opts)?;
        t += chunk;
        if linalg::trace_distance(&state, &prev) < tol {
            let mat = linalg::hermitize(&state);
            let tr = linalg::trace(&mat);
            let mat = mat.mapv(|z| z / tr);
            return Ok(DensityMatrix {
                mat,
                truncation_warning: false,
            });
        }
    }
    Err(Error::ConvergenceFailure { t_cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn mode_params_reject_negative_kerr() {
        assert!(ModeParams::new(1.0, -0.1).is_err());
        assert!(ModeParams::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn schedule_rejects_unordered_pulses() {
        let p = |t: f64| PulseEvent {
            time: t,
            amplitude: c(0.1, 0.0),
            shape: PulseShape::Delta,
        };
        assert!(DriveSchedule::new(c(0.0, 0.0), 1.0, vec![p(2.0), p(1.0)]).is_err());
        assert!(DriveSchedule::new(c(0.0, 0.0), 0.0, vec![]).is_err());
    }

    #[test]
    fn hamiltonian_diagonal_and_hermitian() {
        let s = FockSpace::new(3).unwrap();
        let params = ModeParams::new(2.0, 0.05).unwrap();
        let h = hamiltonian(&s, &params, c(0.2, 0.0)).unwrap();
        // ⟨n|H|n⟩ = E·n + α·n(n−1)
        assert!((h[(2, 2)].re - 4.1).abs() < 1e-14);
        assert!((h[(1, 1)].re - 2.0).abs() < 1e-14);
        let herm = max_abs(&(&h - &crate::linalg::dagger(&h)));
        assert!(herm < 1e-15);

        let zero = hamiltonian(&s, &ModeParams::new(0.0, 0.0).unwrap(), c(0.0, 0.0)).unwrap();
        assert_eq!(max_abs(&zero), 0.0);
    }

    #[test]
    fn vacuum_is_stationary_without_drive() {
        let s = FockSpace::new(6).unwrap();
        let params = ModeParams::new(0.0, 0.0).unwrap();
        let h = hamiltonian(&s, &params, c(0.0, 0.0)).unwrap();
        let rho = DensityMatrix::vacuum(&s);
        let rhs = lindblad_rhs(&s, &rho, &h).unwrap();
        assert!(max_abs(&rhs) < 1e-15);
    }

    #[test]
    fn single_photon_decays_at_unit_rate() {
        let s = FockSpace::new(6).unwrap();
        let params = ModeParams::new(0.0, 0.0).unwrap();
        let h = hamiltonian(&s, &params, c(0.0, 0.0)).unwrap();
        let rho = DensityMatrix::number_state(&s, 1).unwrap();
        let rhs = lindblad_rhs(&s, &rho, &h).unwrap();
        let dn = expectation_raw(s.number(), &rhs).unwrap();
        assert!((dn.re + 1.0).abs() < 1e-13 && dn.im.abs() < 1e-14);
    }

    #[test]
    fn mean_field_decay_of_coherent_state() {
        // iψ̇ = (E − i/2)ψ + P with E = P = 0 gives ψ̇ = −ψ/2.
        let s = FockSpace::new(20).unwrap();
        let params = ModeParams::new(0.0, 0.0).unwrap();
        let h = hamiltonian(&s, &params, c(0.0, 0.0)).unwrap();
        let rho = DensityMatrix::coherent(&s, c(0.4, 0.0));
        let rhs = lindblad_rhs(&s, &rho, &h).unwrap();
        let dpsi = expectation_raw(s.annihilate(), &rhs).unwrap();
        assert!((dpsi - c(-0.2, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn rhs_is_traceless_and_hermiticity_preserving() {
        let s = FockSpace::new(8).unwrap();
        let params = ModeParams::new(1.5, 0.3).unwrap();
        let h = hamiltonian(&s, &params, c(0.2, 0.1)).unwrap();
        let rho = DensityMatrix::coherent(&s, c(0.3, -0.2));
        let rhs = lindblad_rhs(&s, &rho, &h).unwrap();
        assert!(crate::linalg::trace(&rhs).norm() < 1e-12);
        let herm = max_abs(&(&rhs - &crate::linalg::dagger(&rhs)));
        assert!(herm < 1e-12);
    }

    #[test]
    fn delta_pulse_displaces_vacuum_to_coherent() {
        let s = FockSpace::new(30).unwrap();
        let rho = DensityMatrix::vacuum(&s);
        let out = apply_delta_pulse(&s, &rho, c(1.0, 0.0)).unwrap();
        let n = out.expect(s.number()).unwrap().re;
        let pair = out.expect(s.pair()).unwrap().re;
        assert!((n - 1.0).abs() < 1e-8);
        assert!((pair / (n * n) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_pulse_is_identity() {
        let s = FockSpace::new(10).unwrap();
        let rho = DensityMatrix::coherent(&s, c(0.2, 0.1));
        let out = apply_delta_pulse(&s, &rho, c(0.0, 0.0)).unwrap();
        assert_eq!(max_abs(&(out.matrix() - rho.matrix())), 0.0);
    }

    #[test]
    fn pulse_composes_coherent_amplitudes() {
        // D(−i·0.5) on |0.2⟩ gives amplitude 0.2 − 0.5i, still coherent.
        let s = FockSpace::new(30).unwrap();
        let rho = DensityMatrix::coherent(&s, c(0.2, 0.0));
        let out = apply_delta_pulse(&s, &rho, c(0.5, 0.0)).unwrap();
        let psi = out.expect(s.annihilate()).unwrap();
        assert!((psi - c(0.2, -0.5)).norm() < 1e-8);
        let n = out.expect(s.number()).unwrap().re;
        let pair = out.expect(s.pair()).unwrap().re;
        assert!((pair / (n * n) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pulse_flags_truncation_when_headroom_is_gone() {
        let s = FockSpace::new(10).unwrap();
        let rho = DensityMatrix::vacuum(&s);
        let out = apply_delta_pulse(&s, &rho, c(5.0, 0.0)).unwrap();
        assert!(out.truncation_warning());
    }

    #[test]
    fn steady_state_matches_linear_mode_analytics() {
        // α = 0, E = 2, P0 = 0.5: n = P0²/(E²+1/4), ψ = −P0/(E − i/2).
        let s = FockSpace::new(20).unwrap();
        let params = ModeParams::new(2.0, 0.0).unwrap();
        let rho = steady_state_direct(&s, &params, c(0.5, 0.0)).unwrap();
        let n = rho.expect(s.number()).unwrap().re;
        let psi = rho.expect(s.annihilate()).unwrap();
        let expect_n = 0.25 / 4.25;
        let expect_psi = -c(0.5, 0.0) / c(2.0, -0.5);
        assert!((n - expect_n).abs() < 1e-8, "n = {n}");
        assert!((psi - expect_psi).norm() < 1e-8);
    }

    #[test]
    fn steady_state_without_drive_is_vacuum() {
        let s = FockSpace::new(12).unwrap();
        let params = ModeParams::new(0.7, 0.4).unwrap();
        let rho = steady_state_direct(&s, &params, c(0.0, 0.0)).unwrap();
        let vac = DensityMatrix::vacuum(&s);
        assert!(rho.trace_distance(&vac) < 1e-10);
    }

    #[test]
    fn evolution_route_agrees_with_direct_route() {
        let s = FockSpace::new(20).unwrap();
        let params = ModeParams::new(2.0, 0.0).unwrap();
        let by_ev = steady_state_by_evolution(&s, &params, c(0.5, 0.0), 1e-9, 200.0).unwrap();
        let n = by_ev.expect(s.number()).unwrap().re;
        assert!((n - 0.25 / 4.25).abs() < 1e-7);

        // Strong-nonlinearity parameters: the two routes must agree.
        let s2 = FockSpace::new(20).unwrap();
        let params2 = ModeParams::new(0.25, 1.0).unwrap();
        let direct = steady_state_direct(&s2, &params2, c(0.5, 0.0)).unwrap();
        let evolved = steady_state_by_evolution(&s2, &params2, c(0.5, 0.0), 1e-9, 200.0).unwrap();
        assert!(direct.trace_distance(&evolved) < 1e-8);
    }

    #[test]
    fn vacuum_without_drive_converges_immediately() {
        let s = FockSpace::new(8).unwrap();
        let params = ModeParams::new(1.0, 0.2).unwrap();
        let rho = steady_state_by_evolution(&s, &params, c(0.0, 0.0), 1e-10, 5.0).unwrap();
        let vac = DensityMatrix::vacuum(&s);
        assert!(rho.trace_distance(&vac) < 1e-12);
    }

    #[test]
    fn liouvillian_matrix_matches_rhs() {
        let s = FockSpace::new(5).unwrap();
        let params = ModeParams::new(0.8, 0.3).unwrap();
        let h = hamiltonian(&s, &params, c(0.3, -0.1)).unwrap();
        let l = liouvillian_matrix(&s, &h);
        let rho = DensityMatrix::coherent(&s, c(0.3, 0.2));
        let via_matrix = unvectorize(&l.dot(&vectorize(rho.matrix())), 5);
        let via_rhs = lindblad_rhs_raw(&h, rho.matrix());
        assert!(max_abs(&(&via_matrix - &via_rhs)) < 1e-12);
    }

    #[test]
    fn evolve_records_pre_and_post_pulse_states() {
        let s = FockSpace::new(20).unwrap();
        let params = ModeParams::new(0.0, 0.0).unwrap();
        let schedule =
            DriveSchedule::pulse_train(c(0.0, 0.0), c(1.0, 0.0), 1.0, 1, PulseShape::Delta)
                .unwrap();
        let rho0 = DensityMatrix::vacuum(&s);
        let traj = evolve(&s, &params, &schedule, &rho0, &EvolveOptions::new(2.0, 0.5)).unwrap();
        assert_eq!(traj.len(), 5);
        // Grid record at the pulse time holds the post-pulse state (n = 1).
        let at_pulse = &traj.records()[2];
        assert!(at_pulse.pulse);
        assert!((at_pulse.n - 1.0).abs() < 1e-8);
        // The flagged pre-pulse record still sees the vacuum.
        let pre = traj.pre_pulse_at(1.0).unwrap();
        assert!(pre.n < 1e-10);
    }

    #[test]
    fn linear_evolution_keeps_coherent_closure() {
        // α = 0 with drive and pulses: state stays coherent (purity 1,
        // g2 = 1). The correlation of the near-empty transient needs
        // relative accuracy on n²-scale matrix entries, hence the tight
        // integrator setting.
        let s = FockSpace::new(25).unwrap();
        let params = ModeParams::new(2.0, 0.0).unwrap();
        let schedule =
            DriveSchedule::pulse_train(c(0.5, 0.0), c(0.5, 0.0), 3.0, 2, PulseShape::Delta)
                .unwrap();
        let rho0 = DensityMatrix::vacuum(&s);
        let tight = OdeOptions {
            rtol: 1e-11,
            atol: 1e-14,
            h_max: f64::INFINITY,
        };
        let mut opts = EvolveOptions::new(9.0, 0.05);
        opts.ode = tight;
        let traj = evolve(&s, &params, &schedule, &rho0, &opts).unwrap();
        for rec in traj.records() {
            if let Some(g2) = rec.g2 {
                assert!((g2 - 1.0).abs() < 1e-6, "g2 = {g2} at t = {}", rec.t);
            }
        }
        let final_state = state_at(&s, &params, &schedule, &rho0, 9.0, &tight).unwrap();
        assert!(final_state.purity() > 1.0 - 1e-8);
    }

    #[test]
    fn decay_law_without_drive() {
        // n(t) = n(0) e^{−t} for an undriven mode.
        let s = FockSpace::new(15).unwrap();
        let params = ModeParams::new(0.7, 0.2).unwrap();
        let schedule = DriveSchedule::continuous(c(0.0, 0.0), 1.0).unwrap();
        let rho0 = DensityMatrix::coherent(&s, c(0.9, 0.3));
        let n0 = rho0.expect(s.number()).unwrap().re;
        let traj = evolve(
            &s,
            &params,
            &schedule,
            &rho0,
            &EvolveOptions::new(4.0, 0.25),
        )
        .unwrap();
        for rec in traj.records() {
            let expect = n0 * (-rec.t).exp();
            assert!((rec.n - expect).abs() < 1e-8, "t = {}", rec.t);
        }
    }

    #[test]
    fn pulse_free_trajectory_converges_to_direct_steady_state() {
        // Coherences relax at γ/2, so from vacuum the trace distance is
        // ~1e−5 at t = 20 and well under 1e−6 by t = 40.
        let s = FockSpace::new(20).unwrap();
        let params = ModeParams::new(2.0, 0.05).unwrap();
        let p0 = c(0.5, 0.0);
        let schedule = DriveSchedule::continuous(p0, 1.0).unwrap();
        let rho0 = DensityMatrix::vacuum(&s);
        let ss = steady_state_direct(&s, &params, p0).unwrap();
        let at_20 = state_at(&s, &params, &schedule, &rho0, 20.0, &OdeOptions::default()).unwrap();
        assert!(at_20.trace_distance(&ss) < 1e-4);
        let at_40 = state_at(&s, &params, &schedule, &rho0, 40.0, &OdeOptions::default()).unwrap();
        assert!(at_40.trace_distance(&ss) < 1e-6);
    }

    #[test]
    fn gaussian_pulse_approaches_delta_limit() {
        // A narrow Gaussian and an instantaneous pulse of equal area leave
        // nearly the same state behind.
        let s = FockSpace::new(25).unwrap();
        let params = ModeParams::new(0.5, 0.0).unwrap();
        let rho0 = DensityMatrix::vacuum(&s);
        let delta = DriveSchedule::pulse_train(c(0.0, 0.0), c(0.8, 0.0), 4.0, 1, PulseShape::Delta)
            .unwrap();
        let gauss = DriveSchedule::pulse_train(
            c(0.0, 0.0),
            c(0.8, 0.0),
            4.0,
            1,
            PulseShape::Gaussian { sigma: 0.02 },
        )
        .unwrap();
        let opts = OdeOptions::default();
        let rho_d = state_at(&s, &params, &delta, &rho0, 6.0, &opts).unwrap();
        let rho_g = state_at(&s, &params, &gauss, &rho0, 6.0, &opts).unwrap();
        assert!(rho_d.trace_distance(&rho_g) < 2e-3);
    }

    #[test]
    fn trace_and_hermiticity_hold_along_trajectories() {
        let s = FockSpace::new(20).unwrap();
        let params = ModeParams::new(2.0, 0.05).unwrap();
        let schedule =
            DriveSchedule::pulse_train(c(0.2, 0.0), c(1.0, 0.0), 5.0, 2, PulseShape::Delta)
                .unwrap();
        let rho0 = DensityMatrix::vacuum(&s);
        let traj = evolve(
            &s,
            &params,
            &schedule,
            &rho0,
            &EvolveOptions::new(12.0, 0.1),
        )
        .unwrap();
        // evolve() itself enforces the invariants; spot-check the end state.
        let end = state_at(&s, &params, &schedule, &rho0, 12.0, &OdeOptions::default()).unwrap();
        assert!((end.trace().re - 1.0).abs() < 1e-10);
        assert!(end.hermiticity_deviation() < 1e-11);
        assert!(end.min_eigenvalue() > -1e-9);
        assert!(!traj.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn rhs_traceless_for_random_coherent_states(
            bre in -0.7..0.7f64,
            bim in -0.7..0.7f64,
            e in -2.0..2.0f64,
            alpha in 0.0..1.5f64,
        ) {
            let s = FockSpace::new(14).unwrap();
            let params = ModeParams::new(e, alpha).unwrap();
            let h = hamiltonian(&s, &params, c(0.3, 0.0)).unwrap();
            let rho = DensityMatrix::coherent(&s, c(bre, bim));
            let rhs = lindblad_rhs(&s, &rho, &h).unwrap();
            prop_assert!(crate::linalg::trace(&rhs).norm() < 1e-12);
        }
    }
}
