//! Embedded Runge-Kutta 4(5) integration for complex-matrix ODEs.
//!
//! Dormand-Prince coefficients with the first-same-as-last optimization
//! and a standard PI-free step controller. Steps are clamped so the
//! integration lands exactly on the requested end time; callers that need
//! to hit interior events (pulse times, sample times) integrate segment
//! by segment.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Integration tolerances and step bounds.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Hard upper bound on the step size (used to resolve short drive
    /// features); `f64::INFINITY` disables it.
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            h_max: f64::INFINITY,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// Fifth-order solution weights (also the last stage row).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between fifth- and fourth-order weights (error estimate).
const E1: f64 = B1 - 5179.0 / 57600.0;
const E3: f64 = B3 - 7571.0 / 16695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 + 92097.0 / 339200.0;
const E6: f64 = B6 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `dy/dt = rhs(t, y)` from `t0` to `t1`, mutating `y` in place.
///
/// Returns the number of accepted steps. The right-hand side must be
/// smooth on the interval; discontinuous drive events are handled by the
/// caller splitting the integration at event times.
pub fn integrate<F>(rhs: F, y: &mut Array2<C64>, t0: f64, t1: f64, opts: &OdeOptions) -> Result<u64>
where
    F: Fn(f64, &Array2<C64>) -> Array2<C64>,
{
    if !(t1 >= t0) {
        return Err(Error::InvalidArgument(format!(
            "integration interval reversed: {t0} .. {t1}"
        )));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(0);
    }

    let mut t = t0;
    let mut h = span.min(opts.h_max).min(0.1);
    let mut k1 = rhs(t, y);
    let mut accepted: u64 = 0;

    loop {
        let remaining = t1 - t;
        if remaining <= 1e-14 * t1.abs().max(1.0) {
            break;
        }
        h = h.min(remaining).min(opts.h_max);
        if h < 1e-13 * t.abs().max(1.0) {
            return Err(Error::IntegratorFailure {
                t,
                reason: "step size underflow".into(),
            });
        }

        let y2 = &*y + &k1.mapv(|z| z * C64::from(h * A21));
        let k2 = rhs(t + C2 * h, &y2);
        let y3 =
            &*y + &(&k1.mapv(|z| z * C64::from(h * A31)) + &k2.mapv(|z| z * C64::from(h * A32)));
        let k3 = rhs(t + C3 * h, &y3);
        let y4 = &*y
            + &(&k1.mapv(|z| z * C64::from(h * A41))
                + &(&k2.mapv(|z| z * C64::from(h * A42)) + &k3.mapv(|z| z * C64::from(h * A43))));
        let k4 = rhs(t + C4 * h, &y4);
        let y5 = &*y
            + &(&(&k1.mapv(|z| z * C64::from(h * A51)) + &k2.mapv(|z| z * C64::from(h * A52)))
                + &(&k3.mapv(|z| z * C64::from(h * A53)) + &k4.mapv(|z| z * C64::from(h * A54))));
        let k5 = rhs(t + C5 * h, &y5);
        let y6 = &*y
            + &(&(&k1.mapv(|z| z * C64::from(h * A61)) + &k2.mapv(|z| z * C64::from(h * A62)))
                + &(&(&k3.mapv(|z| z * C64::from(h * A63))
                    + &k4.mapv(|z| z * C64::from(h * A64)))
                    + &k5.mapv(|z| z * C64::from(h * A65))));
        let k6 = rhs(t + h, &y6);

        let y_new = &*y
            + &(&(&k1.mapv(|z| z * C64::from(h * B1)) + &k3.mapv(|z| z * C64::from(h * B3)))
                + &(&(&k4.mapv(|z| z * C64::from(h * B4)) + &k5.mapv(|z| z * C64::from(h * B5)))
                    + &k6.mapv(|z| z * C64::from(h * B6))));
        let k7 = rhs(t + h, &y_new);

        // Weighted RMS error of the embedded pair.
        let mut err_acc = 0.0_f64;
        let m = y.len();
        for idx in 0..m {
            let e = k1.as_slice().unwrap()[idx] * C64::from(E1)
                + k3.as_slice().unwrap()[idx] * C64::from(E3)
                + k4.as_slice().unwrap()[idx] * C64::from(E4)
                + k5.as_slice().unwrap()[idx] * C64::from(E5)
                + k6.as_slice().unwrap()[idx] * C64::from(E6)
                + k7.as_slice().unwrap()[idx] * C64::from(E7);
            let e = e * C64::from(h);
            let y_old_mag = y.as_slice().unwrap()[idx].norm();
            let y_new_mag = y_new.as_slice().unwrap()[idx].norm();
            let scale = opts.atol + opts.rtol * y_old_mag.max(y_new_mag);
            let r = e.norm() / scale;
            err_acc += r * r;
        }
        let err = (err_acc / m as f64).sqrt();

        if err <= 1.0 {
            t += h;
            *y = y_new;
            k1 = k7;
            accepted += 1;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok(accepted)
}
