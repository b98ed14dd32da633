//! Closed-form solutions of the singular polycaloric Cauchy problem
//! (∂_t − Δ_B)^m u = f on the half-space, with Δ_B a sum of Bessel operators,
//! together with the Erdélyi–Kober operators behind them and an independent
//! finite-difference oracle.

pub mod diffop;
pub mod ek;
pub mod error;
pub mod fd;
pub mod field;
pub mod kernel;
pub mod numerics;
pub mod solver;

pub use error::{Error, Result};
