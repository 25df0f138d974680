//! Simulator for dynamical photon blockade in a single driven-dissipative
//! Kerr mode.
//!
//! The library evolves a truncated-Fock-space density matrix under a
//! Lindblad master equation with a drive that combines a continuous
//! amplitude and a train of pulses (instantaneous displacements or
//! finite-width Gaussians), and computes the photon statistics that
//! diagnose blockade: occupation, mean field, equal-time and two-time
//! second-order correlation functions.
//!
//! Everything is expressed in units of the mode decay rate: energies are
//! given in units of `γ` and times in units of `ħ/γ`, with `ħ = γ = 1`
//! fixed internally.
//!
//! Layering, bottom up:
//!
//! - [`linalg`]: dense complex matrix kernels (Hermitian eigensolver,
//!   LU solve, Kronecker products).
//! - [`fock`]: truncated Fock space with cached ladder operators,
//!   displacement unitaries and expectation values.
//! - [`ode`]: embedded Runge-Kutta 4(5) stepper for matrix-valued ODEs.
//! - [`dynamics`]: master-equation evolution, pulse application and
//!   steady-state solvers.
//! - [`observables`]: correlation functions, the drive-rate function of
//!   the correlation derivative, and two-time correlations by quantum
//!   regression.
//! - [`experiments`]: scenario orchestration (drive comparisons,
//!   occupation sweeps, regime maps, two-time scans) and self-checks.

pub mod checks;
pub mod dynamics;
pub mod exec;
pub mod experiments;
pub mod fock;
pub mod linalg;
pub mod observables;
pub mod ode;
pub mod presets;

mod error;

pub use error::{Error, Result};

pub use num_complex::Complex64;
