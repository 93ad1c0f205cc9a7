//! Wave packet transforms, Schrödinger propagators and `H^s` wave front set
//! detectors on uniform periodic lattices.
//!
//! The crate is organised bottom-up:
//!
//! * [`field`]: grids, sampled fields, the Fourier transform, pairings and
//!   weighted Sobolev norms.
//! * [`windows`]: the dilated Gaussian `phi_lambda`, its exact free evolution,
//!   and closed forms for self-transforms and nonlinear pairings.
//! * [`wavepacket`]: the discrete wave packet transform with its adjoint,
//!   inversion and Plancherel identities.
//! * [`schrodinger`]: free and split-step nonlinear propagation, conservation
//!   diagnostics and the transformed Duhamel identity.
//! * [`microlocal`]: cone-Fourier and wave packet detectors, the transported
//!   criterion, and the end-to-end propagation experiment.
//! * [`corpus`] and [`experiments`]: named test signals, run configuration and
//!   the identity suite used by the `wfnls` binary.
//!
//! # Normalisation table
//!
//! | quantity | definition |
//! |---|---|
//! | Fourier transform | `F f(xi) = (2 pi)^{-n/2} int f(x) e^{-i x.xi} dx` |
//! | wave packet transform | `W_g f(x, xi) = int conj(g(y - x)) f(y) e^{-i y.xi} dy` (no `2 pi`) |
//! | adjoint | `W_g^* F(y) = (2 pi)^{-n} int int g(y - x) F(x, xi) e^{i y.xi} dx dxi` |
//! | inversion | `f = (h, g)^{-1} W_h^* W_g f` |
//! | Plancherel | `‖W_g f‖ = (2 pi)^{n/2} ‖g‖ ‖f‖` |
//! | pairing | `(f, g) = int f conj(g) dx` |
//! | free flow | `U(t) = e^{i t Delta / 2}`, multiplier `e^{-i |xi|^2 t / 2}` |
//! | equation | `i u_t + Delta u / 2 = u^p conj(u)^q` |
//!
//! On the periodic lattice the discrete versions of the adjoint, inversion
//! and Plancherel identities hold exactly, because `dx * dxi * N = 2 pi`.

// `!(x > 0.0)` is used on purpose throughout: it rejects NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod experiments;
pub mod field;
pub mod microlocal;
pub mod schrodinger;
pub mod wavepacket;
pub mod windows;

pub use error::{Error, Result};
pub use field::{Domain, Field, Grid, SobolevParams};
pub use num_complex::Complex64;
