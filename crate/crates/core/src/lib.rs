//! Spectral simulation and numerical verification toolkit for two
//! driven-damped Gross-Pitaevskii models of pumped exciton-polariton
//! condensates:
//!
//! * the complex Gross-Pitaevskii equation (cGPE) on the torus,
//!   `u_t = i u_xx - i|u|^2 u + (xi - sigma|u|^2) u`;
//! * the exciton-polariton system with a reservoir density `n`,
//!   `u_t = i u_xx - i g|u|^2 u - i lambda n u + (R n - alpha) u`,
//!   `n_t = P - (R|u|^2 + beta) n`.
//!
//! The crate provides the periodic spectral lattice ([`grid`]), right-hand
//! sides and closed-form oracles ([`model`]), Strang-splitting steppers
//! ([`integrators`]), Picard iteration on the Duhamel formulation
//! ([`picard`]), discrete Bourgain-space norms and multilinear forms
//! ([`bourgain`]) and the a priori bound checks ([`bounds`]).

pub mod bounds;
pub mod bourgain;
pub mod grid;
pub mod integrators;
pub mod model;
pub mod picard;
pub mod quadrature;

pub use num_complex::Complex64;

/// Japanese bracket `<x> = (1 + x^2)^{1/2}`.
#[inline]
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}
