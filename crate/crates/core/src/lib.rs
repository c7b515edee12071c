//! Forward and inverse acoustic scattering by a locally rough, sound-hard
//! plane in two dimensions.
//!
//! The scattered field is represented by single-layer potentials on the
//! truncated surface `Γ_R`, the lower half circle `∂B_R⁻` and (optionally)
//! a small auxiliary circle carrying an impedance condition. The resulting
//! second-kind system has two corners at `(±R, 0)`; it is discretized with a
//! 16-point panel Nyström scheme and the corners are handled by recursively
//! compressed inverse preconditioning.
//!
//! Module map:
//! - [`specfun`]: Bessel/Hankel functions, Gauss–Legendre and log-product rules.
//! - [`geometry`]: surface profiles, spline basis, boundary curves, panel meshes.
//! - [`kernels`]: pointwise Helmholtz kernels and their logarithmic splits.
//! - [`nystrom`]: block operator assembly, right-hand sides, far fields, boundary traces.
//! - [`rcip`]: star/circ split, compressed inverse, preconditioned solve.
//! - [`forward`]: end-to-end forward solves and validation experiments.
//! - [`inverse`]: far-field operator, Fréchet derivative, Levenberg–Marquardt loop.
//! - [`cli`]: command-line front end.

pub mod cli;
mod dense;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod inverse;
pub mod kernels;
pub mod nystrom;
pub mod rcip;
pub mod specfun;

pub use error::{Error, Result};

/// Two-dimensional point or vector.
pub type Point = [f64; 2];

pub(crate) mod vec2 {
    use crate::Point;

    #[inline]
    pub fn sub(a: Point, b: Point) -> Point {
        [a[0] - b[0], a[1] - b[1]]
    }

    #[inline]
    pub fn dot(a: Point, b: Point) -> f64 {
        a[0] * b[0] + a[1] * b[1]
    }

    #[inline]
    pub fn norm(a: Point) -> f64 {
        a[0].hypot(a[1])
    }

    #[inline]
    pub fn reflect(a: Point) -> Point {
        [a[0], -a[1]]
    }
}
