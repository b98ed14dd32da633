//! Special functions and quadrature rules shared by the operators and the solver.

pub mod bessel;
pub mod gamma;
pub mod quad;

pub use bessel::{
    bessel_clifford, bessel_clifford_derivative, bessel_clifford_i, bessel_clifford_i_scaled,
    bessel_clifford_j, bessel_i_scaled, bessel_j, CliffordKind,
};
pub use gamma::{binomial, factorial, gamma_fn, ln_gamma};
pub use quad::{
    gauss_legendre, integrate_finite, integrate_gaussian_tail, integrate_gaussian_tail_offset,
    integrate_gaussian_tail_weighted, tail_window, QuadResult, QuadSpec, RuleKind,
};
