//! Self-adjoint realizations of the two-anyon relative Hamiltonian.
//!
//! The s-wave sector admits a one-parameter family of extensions labelled
//! by `beta`, defined through quadratic forms built on the defect function
//! `G_lambda(r) = lambda^alpha K_alpha(lambda r)`. This crate evaluates those
//! forms, computes their low-lying spectra by Rayleigh-Ritz, and checks the
//! result against the closed-form bound state.
//!
//! Units: relative coordinate, `hbar = 1`, `m = 1/2`. Radial profiles of
//! plane functions are normalized with the planar measure, so
//! `||f||^2 = 2 pi int r f(r)^2 dr`; Fourier components `psi_{2k}` carry the
//! `1/sqrt(2 pi)` of the angular decomposition and use `int r |psi_{2k}|^2 dr`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod defect;
pub mod error;
pub mod forms;
pub mod potentials;
pub mod quad;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
pub use specfun::Order;
