//! Exact WKB analysis for one-dimensional Schrodinger equations with polynomial potentials.
//!
//! The equation is `psi'' = lambda^2 q(x) psi` with `q = V - E`. Fundamental solutions are
//! written as `q^{-1/4} exp(-lambda xi) chi` where `xi` is the full action `int sqrt(q)`.
//! The amplitude `chi` is studied through its semiclassical series, its Borel transform
//! `chi~(s)` (paired with `exp(2 lambda s)`), the topological expansion of the Borel
//! function, and hyperasymptotic re-expansion of optimally truncated remainders.

pub mod error;
pub mod series;
pub mod quad;
pub mod special;
pub mod potential;
pub mod geometry;
pub mod xipath;
pub mod ode;
pub mod wkb;
pub mod borel;
pub mod topo;
pub mod hyper;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Shorthand used throughout the crate.
pub type C64 = Complex64;

pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
