//! Cross-cutting invariants: periodic steady regime, two-time symmetry
//! against an adjoint-propagation oracle, truncation flags across the
//! published parameter boxes, and bitwise determinism.

use blockade::dynamics::{hamiltonian, state_at, DensityMatrix, DriveSchedule, ModeParams};
use blockade::experiments::{run_regime_map, run_time_trace};
use blockade::fock::{expectation_raw, FockSpace};
use blockade::observables::g2_two_time;
use blockade::ode::{integrate, OdeOptions};
use blockade::presets;
use blockade::Complex64 as C64;

use ndarray::Array2;

#[test]
fn settled_periods_repeat_pointwise() {
    // After warm-up the combined drive reaches a periodic regime: the
    // correlation traces of consecutive periods coincide.
    let mut cfg = presets::weak_drive_comparison();
    cfg.warmup_periods = 2;
    cfg.measure_periods = 2;
    let traj = run_time_trace(&cfg).unwrap();
    let period_samples = (cfg.period / cfg.sample_dt).round() as usize;
    let start = traj.index_of_time(cfg.warmup_periods as f64 * cfg.period);
    let records = traj.records();
    let mut worst = 0.0_f64;
    for k in 0..period_samples {
        let (a, b) = (&records[start + k], &records[start + period_samples + k]);
        if let (Some(g2_a), Some(g2_b)) = (a.g2, b.g2) {
            worst = worst.max((g2_a - g2_b).abs());
        }
    }
    assert!(worst < 1e-5, "periods differ by {worst:.3e}");

    // Record-level ranges along the way: occupations non-negative up to
    // roundoff, defined correlations likewise.
    for rec in records {
        assert!(rec.n >= -1e-10, "negative occupation {} at t = {}", rec.n, rec.t);
        if let Some(g2) = rec.g2 {
            assert!(g2 >= -1e-8, "negative correlation {g2} at t = {}", rec.t);
        }
    }
}

// Adjoint-propagation oracle: evolve the observable instead of the
// regression operator and use duality, tr(Λ†[O] X) = tr(O Λ[X]).
fn two_time_by_adjoint(
    space: &FockSpace,
    params: &ModeParams,
    p0: C64,
    rho_anchor: &DensityMatrix,
    delay: f64,
) -> f64 {
    let h = hamiltonian(space, params, p0).unwrap();
    let a_op = space.annihilate();
    let num = space.number();
    let d = space.dim();

    // dO/ds = i[H,O] + a† O a − ½{a†a, O}
    let rhs = |_t: f64, o: &Array2<C64>| {
        let comm = h.dot(o) - o.dot(&h);
        let mut out = comm.mapv(|z| z * C64::new(0.0, 1.0));
        for i in 0..d {
            for j in 0..d {
                let mut v = o[(i, j)] * C64::from(-0.5 * (i + j) as f64);
                if i >= 1 && j >= 1 {
                    let w = ((i * j) as f64).sqrt();
                    v += o[(i - 1, j - 1)] * C64::from(w);
                }
                out[(i, j)] += v;
            }
        }
        out
    };

    let mut obs = num.clone();
    integrate(rhs, &mut obs, 0.0, delay, &OdeOptions::default()).unwrap();

    let x0 = a_op.dot(rho_anchor.matrix()).dot(space.create());
    let numer = expectation_raw(&obs, &x0).unwrap().re;

    // Physical n(t) for the denominator.
    let schedule = DriveSchedule::continuous(p0, 1.0).unwrap();
    let rho_later = state_at(
        space,
        params,
        &schedule,
        rho_anchor,
        delay,
        &OdeOptions::default(),
    )
    .unwrap();
    let n_later = rho_later.expect(num).unwrap().re;
    let n_anchor = rho_anchor.expect(num).unwrap().re;
    numer / (n_later * n_anchor)
}

#[test]
fn two_time_matches_adjoint_propagation() {
    // Pulse-free transient: anchor mid-relaxation so the correlation is
    // genuinely time-dependent, then compare the regression route with
    // the adjoint-observable route at several delays.
    let space = FockSpace::new(18).unwrap();
    let params = ModeParams::new(0.25, 1.0).unwrap();
    let p0 = C64::new(0.5, 0.0);
    let schedule = DriveSchedule::continuous(p0, 1.0).unwrap();
    let rho0 = DensityMatrix::vacuum(&space);
    let t_a = 3.0;
    let rho_a = state_at(
        &space,
        &params,
        &schedule,
        &rho0,
        t_a,
        &OdeOptions::default(),
    )
    .unwrap();

    let delays = [0.5, 1.5, 3.0];
    let grid: Vec<f64> = delays.iter().map(|d| t_a + d).collect();
    let reg = g2_two_time(
        &space,
        &params,
        &schedule,
        &rho_a,
        t_a,
        &grid,
        4.0,
        &OdeOptions::default(),
    )
    .unwrap();

    for (k, &delay) in delays.iter().enumerate() {
        let via_regression = reg.values[k].unwrap();
        let via_adjoint = two_time_by_adjoint(&space, &params, p0, &rho_a, delay);
        let dev = (via_regression - via_adjoint).abs();
        assert!(
            dev < 1e-6,
            "delay {delay}: regression {via_regression} vs adjoint {via_adjoint}"
        );
    }
}

#[test]
fn regime_map_corners_hold_truncation_headroom() {
    // Corner-inclusive coarse grid over the published parameter box;
    // every point must keep its headroom flag clean.
    let cfg = presets::regime_map_base();
    let kerr = presets::log_grid(0.02, 2.0, 4);
    let p0 = presets::log_grid(0.05, 1.0, 4);
    let map = run_regime_map(&cfg, &kerr, &p0).unwrap();
    assert_eq!(map.points.len(), 16);
    for p in &map.points {
        assert!(
            p.converged,
            "truncation flag tripped at kerr = {}, p0 = {}",
            p.kerr, p.p0
        );
        assert!(p.g2_ts.is_some());
    }
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = presets::strong_enhancement().with_sample_dt(0.05);
    let t1 = run_time_trace(&cfg).unwrap();
    let t2 = run_time_trace(&cfg).unwrap();
    assert_eq!(t1.len(), t2.len());
    for (a, b) in t1.records().iter().zip(t2.records()) {
        assert_eq!(a.n.to_bits(), b.n.to_bits());
        assert_eq!(a.psi.re.to_bits(), b.psi.re.to_bits());
        assert_eq!(a.g2.map(f64::to_bits), b.g2.map(f64::to_bits));
        assert_eq!(a.f.map(f64::to_bits), b.f.map(f64::to_bits));
    }
}
