//! Dense complex matrix kernels.
//!
//! Everything here targets the desk-scale sizes of this crate (mode
//! dimension <= 40, vectorized generators <= 1600), where straightforward
//! dense algorithms are both fast enough and numerically transparent:
//! a cyclic Jacobi eigensolver for Hermitian matrices and an LU solve
//! with partial pivoting for the constrained steady-state system.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Matrix trace.
pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().iter().sum()
}

/// Largest entry magnitude.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Identity matrix of size `dim`.
pub fn eye(dim: usize) -> Array2<C64> {
    Array2::eye(dim)
}

/// Kronecker product (row-major block expansion).
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    ndarray::linalg::kron(a, b)
}

/// `(a + a†) / 2`, the Hermitian part.
pub fn hermitize(a: &Array2<C64>) -> Array2<C64> {
    let ad = dagger(a);
    (a + &ad).mapv(|z| 0.5 * z)
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching unitary of
/// column eigenvectors, so `a = v · diag(w) · v†`. Only the Hermitian
/// part of the input is consulted; callers are expected to pass matrices
/// that are Hermitian up to roundoff.
pub fn eigh(a: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh: matrix must be square");
    let mut m = hermitize(a);
    let mut v: Array2<C64> = Array2::eye(n);
    if n == 1 {
        return (ndarray::arr1(&[m[(0, 0)].re]), v);
    }

    let scale = max_abs(&m).max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;

    // Cyclic sweeps; each rotation annihilates one off-diagonal pair.
    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= tol * 1e-2 {
                    continue;
                }
                let phase = apq / mag;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let s_ph = phase * s;

                // Columns p and q of both m and the accumulated basis.
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * c - mkq * s_ph.conj();
                    m[(k, q)] = mkp * s_ph + mkq * c;
                }
                // Rows p and q (conjugate rotation from the left).
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = mpk * c - mqk * s_ph;
                    m[(q, k)] = mpk * s_ph.conj() + mqk * c;
                }
                // Force the rotated pair to exact zero and real diagonals.
                m[(p, q)] = C64::new(0.0, 0.0);
                m[(q, p)] = C64::new(0.0, 0.0);
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * s_ph.conj();
                    v[(k, q)] = vkp * s_ph + vkq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let w: Array1<f64> = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut vs = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for row in 0..n {
            vs[(row, col)] = v[(row, i)];
        }
    }
    (w, vs)
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: &Array2<C64>) -> Array1<f64> {
    eigh(a).0
}

/// Solve `a · x = b` by LU with partial pivoting.
pub fn lu_solve(a: &Array2<C64>, b: &Array1<C64>) -> Result<Array1<C64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch(a.ncols(), b.len()));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = max_abs(a).max(f64::MIN_POSITIVE);

    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_mag = lu[(k, k)].norm();
        for r in (k + 1)..n {
            let mag = lu[(r, k)].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = r;
            }
        }
        if pivot_mag < 1e-14 * scale {
            return Err(Error::SingularMatrix);
        }
        if pivot_row != k {
            for c in 0..n {
                let tmp = lu[(k, c)];
                lu[(k, c)] = lu[(pivot_row, c)];
                lu[(pivot_row, c)] = tmp;
            }
            perm.swap(k, pivot_row);
            let tmp = x[k];
            x[k] = x[pivot_row];
            x[pivot_row] = tmp;
        }
        let pivot = lu[(k, k)];
        for r in (k + 1)..n {
            let factor = lu[(r, k)] / pivot;
            lu[(r, k)] = factor;
            for c in (k + 1)..n {
                let delta = factor * lu[(k, c)];
                lu[(r, c)] -= delta;
            }
            let dx = factor * x[k];
            x[r] -= dx;
        }
    }

    // Back substitution.
    for k in (0..n).rev() {
        let mut acc = x[k];
        for c in (k + 1)..n {
            acc -= lu[(k, c)] * x[c];
        }
        x[k] = acc / lu[(k, k)];
    }
    Ok(x)
}

/// Trace distance `‖r1 − r2‖₁ / 2` between two Hermitian matrices.
pub fn trace_distance(r1: &Array2<C64>, r2: &Array2<C64>) -> f64 {
    let diff = r1 - r2;
    let w = eigvalsh(&diff);
    0.5 * w.iter().map(|x| x.abs()).sum::<f64>()
}
