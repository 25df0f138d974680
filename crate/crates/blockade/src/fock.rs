//! Truncated Fock space and its cached operator matrices.
//!
//! A [`FockSpace`] of dimension `d` retains the number states
//! `|0⟩ … |d−1⟩`. All operators are dense `d×d` complex matrices; at the
//! desk scales this crate targets (d <= 40) sparsity buys nothing.
//! Energies are dimensionless (units of the decay rate) throughout.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::linalg;
use crate::{Error, Result};

/// Dense operator on a truncated Fock space.
pub type Operator = Array2<C64>;

/// Truncated bosonic Hilbert space with cached ladder-operator matrices.
///
/// The cached matrices satisfy, exactly as matrix identities:
/// `number = create · annihilate` and `pair = create² · annihilate²`
/// (the Kerr term `a†a†aa`).
#[derive(Debug, Clone)]
pub struct FockSpace {
    dim: usize,
    annihilate: Operator,
    create: Operator,
    number: Operator,
    pair: Operator,
}

impl FockSpace {
    /// Build a space with `dim` retained levels (`dim >= 2`).
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSpace(dim));
        }
        let mut annihilate = Array2::<C64>::zeros((dim, dim));
        for n in 1..dim {
            annihilate[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        let create = linalg::dagger(&annihilate);
        let number = create.dot(&annihilate);
        let pair = create.dot(&create).dot(&annihilate).dot(&annihilate);
        Ok(Self {
            dim,
            annihilate,
            create,
            number,
            pair,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Annihilation operator `a`: `⟨n−1|a|n⟩ = √n`.
    pub fn annihilate(&self) -> &Operator {
        &self.annihilate
    }

    /// Creation operator `a†`.
    pub fn create(&self) -> &Operator {
        &self.create
    }

    /// Number operator `a†a`.
    pub fn number(&self) -> &Operator {
        &self.number
    }

    /// Pair (Kerr) operator `a†a†aa`.
    pub fn pair(&self) -> &Operator {
        &self.pair
    }

    /// Displacement unitary `D(β) = exp(β a† − β* a)`.
    ///
    /// The generator is anti-Hermitian, so the exponential is taken by
    /// eigendecomposition of the Hermitian matrix `−i(β a† − β* a)`;
    /// the result is unitary up to truncation error. Callers are
    /// responsible for headroom: `|β|²` should be well below `dim`.
    pub fn displacement(&self, beta: C64) -> Result<Operator> {
        if !beta.re.is_finite() || !beta.im.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "displacement amplitude must be finite, got {beta}"
            )));
        }
        // G = β a† − β* a;  M = −iG is Hermitian;  D = exp(iM).
        let g = self.create.mapv(|z| z * beta) - self.annihilate.mapv(|z| z * beta.conj());
        let m = g.mapv(|z| z * C64::new(0.0, -1.0));
        let (w, v) = linalg::eigh(&m);
        let phases: Array1<C64> = w.iter().map(|&x| C64::new(0.0, x).exp()).collect();
        let mut d = Array2::<C64>::zeros((self.dim, self.dim));
        for (k, ph) in phases.iter().enumerate() {
            d[(k, k)] = *ph;
        }
        Ok(v.dot(&d).dot(&linalg::dagger(&v)))
    }

    /// Ket of the number state `|n⟩`.
    pub fn number_ket(&self, n: usize) -> Result<Array1<C64>> {
        if n >= self.dim {
            return Err(Error::InvalidArgument(format!(
                "number state {n} outside space of dimension {}",
                self.dim
            )));
        }
        let mut ket = Array1::<C64>::zeros(self.dim);
        ket[n] = C64::new(1.0, 0.0);
        Ok(ket)
    }

    /// Normalized coherent-state ket with amplitudes `β^n / √(n!)`.
    pub fn coherent_ket(&self, beta: C64) -> Array1<C64> {
        let mut ket = Array1::<C64>::zeros(self.dim);
        let mut amp = C64::new(1.0, 0.0);
        ket[0] = amp;
        for n in 1..self.dim {
            amp = amp * beta / C64::new((n as f64).sqrt(), 0.0);
            ket[n] = amp;
        }
        let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        ket.mapv(|z| z / norm)
    }
}

/// Expectation value `tr(op · rho)` of an operator in a state given as a
/// raw density matrix.
pub fn expectation_raw(op: &Operator, rho: &Array2<C64>) -> Result<C64> {
    if op.nrows() != rho.nrows() || op.ncols() != rho.ncols() || op.nrows() != op.ncols() {
        return Err(Error::DimensionMismatch(op.nrows(), rho.nrows()));
    }
    let n = op.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += op[(i, j)] * rho[(j, i)];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, max_abs};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn outer(ket: &Array1<C64>) -> Array2<C64> {
        let n = ket.len();
        let mut rho = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                rho[(i, j)] = ket[i] * ket[j].conj();
            }
        }
        rho
    }

    #[test]
    fn rejects_too_small_space() {
        assert!(matches!(FockSpace::new(1), Err(Error::InvalidSpace(1))));
        assert!(matches!(FockSpace::new(0), Err(Error::InvalidSpace(0))));
    }

    #[test]
    fn annihilation_entries_dim3() {
        let s = FockSpace::new(3).unwrap();
        let a = s.annihilate();
        assert!((a[(0, 1)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((a[(1, 2)] - c(2f64.sqrt(), 0.0)).norm() < 1e-15);
        let nonzeros = a.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzeros, 2);
    }

    #[test]
    fn truncation_makes_a_squared_vanish_at_dim2() {
        let s = FockSpace::new(2).unwrap();
        let a2 = s.annihilate().dot(s.annihilate());
        assert_eq!(max_abs(&a2), 0.0);
    }

    #[test]
    fn number_operator_spectrum_dim10() {
        let s = FockSpace::new(10).unwrap();
        let w = crate::linalg::eigvalsh(s.number());
        for (k, &x) in w.iter().enumerate() {
            assert!((x - k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn commutator_truncation_pattern() {
        // [a, a†] = I except the last diagonal entry, which is −(dim−1).
        for dim in [2usize, 3, 7, 12] {
            let s = FockSpace::new(dim).unwrap();
            let comm = s.annihilate().dot(s.create()) - s.create().dot(s.annihilate());
            for i in 0..dim {
                for j in 0..dim {
                    let expect = if i == j {
                        if i == dim - 1 {
                            -((dim - 1) as f64)
                        } else {
                            1.0
                        }
                    } else {
                        0.0
                    };
                    assert!(
                        (comm[(i, j)] - c(expect, 0.0)).norm() < 1e-12,
                        "dim {dim} entry ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn displacement_of_zero_is_identity() {
        let s = FockSpace::new(12).unwrap();
        let d = s.displacement(c(0.0, 0.0)).unwrap();
        assert!(max_abs(&(&d - &Array2::<C64>::eye(12))) < 1e-13);
    }

    #[test]
    fn displacement_rejects_non_finite() {
        let s = FockSpace::new(8).unwrap();
        assert!(s.displacement(c(f64::NAN, 0.0)).is_err());
        assert!(s.displacement(c(0.0, f64::INFINITY)).is_err());
    }

    #[test]
    fn displaced_vacuum_is_coherent_state() {
        // β = −i (unit pulse area): ⟨a†a⟩ = 1 and pair correlation 1.
        let s = FockSpace::new(30).unwrap();
        let d = s.displacement(c(0.0, -1.0)).unwrap();
        let vac = s.number_ket(0).unwrap();
        let ket = d.dot(&vac);
        let rho = outer(&ket);
        let n = expectation_raw(s.number(), &rho).unwrap().re;
        let g2_num = expectation_raw(s.pair(), &rho).unwrap().re;
        assert!((n - 1.0).abs() < 1e-8);
        assert!((g2_num / (n * n) - 1.0).abs() < 1e-8);
    }

    /// Series-summation oracle for the displacement exponential,
    /// independent of the eigendecomposition route.
    fn displacement_by_series(s: &FockSpace, beta: C64) -> Array2<C64> {
        let dim = s.dim();
        let g = s.create().mapv(|z| z * beta) - s.annihilate().mapv(|z| z * beta.conj());
        // Scale so the series converges fast, then square back up.
        let norm = max_abs(&g) * dim as f64;
        let squarings = norm.log2().ceil().max(0.0) as u32 + 1;
        let scaled = g.mapv(|z| z / 2f64.powi(squarings as i32));
        let mut term: Array2<C64> = Array2::eye(dim);
        let mut acc: Array2<C64> = Array2::eye(dim);
        for k in 1..40 {
            term = term.dot(&scaled).mapv(|z| z / C64::new(k as f64, 0.0));
            acc = acc + &term;
            if max_abs(&term) < 1e-18 {
                break;
            }
        }
        let mut out = acc;
        for _ in 0..squarings {
            out = out.dot(&out);
        }
        out
    }

    #[test]
    fn displacement_matches_series_and_is_unitary() {
        let s = FockSpace::new(30).unwrap();
        let beta = c(0.5, 0.0);
        let d = s.displacement(beta).unwrap();
        let d_series = displacement_by_series(&s, beta);
        assert!(max_abs(&(&d - &d_series)) < 1e-12);
        let prod = d.dot(&dagger(&d));
        assert!(max_abs(&(&prod - &Array2::<C64>::eye(30))) < 1e-10);
    }

    #[test]
    fn expectation_number_in_fock_two() {
        let s = FockSpace::new(6).unwrap();
        let rho = outer(&s.number_ket(2).unwrap());
        let v = expectation_raw(s.number(), &rho).unwrap();
        assert!((v - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn expectation_identity_is_unit_trace() {
        let s = FockSpace::new(25).unwrap();
        let rho = outer(&s.coherent_ket(c(0.4, -0.2)));
        let v = expectation_raw(&Array2::<C64>::eye(25), &rho).unwrap();
        assert!((v.re - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
    }

    #[test]
    fn expectation_annihilation_in_coherent_state() {
        let s = FockSpace::new(25).unwrap();
        let rho = outer(&s.coherent_ket(c(0.3, 0.0)));
        let v = expectation_raw(s.annihilate(), &rho).unwrap();
        assert!((v - c(0.3, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn expectation_rejects_dimension_mismatch() {
        let s5 = FockSpace::new(5).unwrap();
        let s6 = FockSpace::new(6).unwrap();
        let rho = outer(&s6.number_ket(0).unwrap());
        assert!(matches!(
            expectation_raw(s5.number(), &rho),
            Err(Error::DimensionMismatch(5, 6))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn hermitian_expectation_is_real(bre in -0.8..0.8f64, bim in -0.8..0.8f64) {
            let s = FockSpace::new(16).unwrap();
            let rho = outer(&s.coherent_ket(c(bre, bim)));
            let v = expectation_raw(s.number(), &rho).unwrap();
            prop_assert!(v.im.abs() < 1e-12);
            let v2 = expectation_raw(s.pair(), &rho).unwrap();
            prop_assert!(v2.im.abs() < 1e-12);
        }

        #[test]
        fn displacement_inverse_composition(bre in -1.2..1.2f64, bim in -1.2..1.2f64) {
            let dim = 24usize;
            let beta = c(bre, bim);
            prop_assume!(beta.norm_sqr() <= dim as f64 / 4.0);
            let s = FockSpace::new(dim).unwrap();
            let d = s.displacement(beta).unwrap();
            let dm = s.displacement(-beta).unwrap();
            let prod = d.dot(&dm);
            prop_assert!(max_abs(&(&prod - &Array2::<C64>::eye(dim))) < 1e-9);
        }
    }
}
