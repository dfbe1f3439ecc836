//! Computational core for Diophantine inequalities over Piatetski-Shapiro primes.
//!
//! Everything here is `no_std` (with `alloc`): prime and Piatetski-Shapiro prime
//! generation, the smoothing kernel and its Fourier transform, the exponential
//! sums `S`, `Sigma`, `Omega`, `Psi` and the integral `I`, continued fractions and
//! Dirichlet approximation, and the circle-method decomposition of the weighted
//! triple count `Gamma(X)`.
//!
//! File formats, configuration and the command line live in the companion
//! `psd` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod accum;
pub mod approx;
pub mod dd;
pub mod error;
pub mod expsums;
pub mod gammadecomp;
pub mod kernel;
pub mod params;
pub mod phase;
pub mod primes;
pub mod quad;

pub use error::{Error, Result};
pub use params::{Coefficients, GammaExponent, RunParameters};
pub use phase::PhaseValue;
