//! Pointwise Helmholtz kernels and their logarithmic splits.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::specfun::{BesselSet, J0_FIRST_ZERO};
use crate::{vec2, Error, Point, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Wave number and impedance constant of one solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveContext {
    pub k: f64,
    pub rho_imp: f64,
}

impl WaveContext {
    pub fn new(k: f64, rho_imp: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Config(format!(
                "wave number must be positive, got {k}"
            )));
        }
        if !(rho_imp.is_finite() && rho_imp > 0.0) {
            return Err(Error::Config(format!(
                "impedance constant must be positive, got {rho_imp}"
            )));
        }
        Ok(Self { k, rho_imp })
    }

    /// Rejects auxiliary radii for which `k r` reaches the first zero of `J0`.
    pub fn check_aux_radius(&self, aux_radius: f64) -> Result<()> {
        if self.k * aux_radius >= J0_FIRST_ZERO {
            return Err(Error::Config(format!(
                "k * aux_radius = {} must stay below the first zero of J0 ({J0_FIRST_ZERO})",
                self.k * aux_radius
            )));
        }
        Ok(())
    }

    /// `γ = e^{iπ/4} / √(8πk)`.
    pub fn gamma(&self) -> Complex64 {
        far_field_constant(self.k)
    }
}

/// `e^{iπ/4} / √(8πk)`.
pub fn far_field_constant(k: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (8.0 * PI * k).sqrt(), 0.25 * PI)
}

fn separation(x: Point, y: Point) -> Result<(Point, f64)> {
    let d = vec2::sub(x, y);
    let r = vec2::norm(d);
    if r == 0.0 {
        return Err(Error::Domain(
            "kernel evaluated at coincident points".into(),
        ));
    }
    Ok((d, r))
}

/// `Φ_k(x, y) = (i/4) H₀⁽¹⁾(k|x−y|)`.
pub fn phi_k(x: Point, y: Point, k: f64) -> Result<Complex64> {
    let (_, r) = separation(x, y)?;
    Ok(phi_raw(r, k))
}

#[inline]
pub(crate) fn phi_raw(r: f64, k: f64) -> Complex64 {
    let z = k * r;
    0.25 * I * Complex64::new(libm::j0(z), libm::y0(z))
}

/// `∂Φ_k(x, y)/∂ν(x) = −(ik/4) H₁⁽¹⁾(k|x−y|) ν(x)·(x−y)/|x−y|`.
pub fn kernel_kprime(x: Point, nu_x: Point, y: Point, k: f64) -> Result<Complex64> {
    let (d, r) = separation(x, y)?;
    Ok(kprime_raw(d, r, nu_x, k))
}

#[inline]
pub(crate) fn kprime_raw(d: Point, r: f64, nu: Point, k: f64) -> Complex64 {
    kprime_chord(r, vec2::dot(nu, d) / r, k)
}

/// `K′` from `r = |x − y|` and `c = ν·(x − y)/r`.
#[inline]
pub(crate) fn kprime_chord(r: f64, c: f64, k: f64) -> Complex64 {
    let z = k * r;
    -0.25 * I * k * c * Complex64::new(libm::j1(z), libm::y1(z))
}

/// Kernel of `K′ʳᵉ`: [`kernel_kprime`] at the mirror point `x^re = (x₁, −x₂)`
/// with the normal `nu_re = ν(x^re)` of the upper half circle.
pub fn kernel_kprime_reflected(x: Point, nu_re: Point, y: Point, k: f64) -> Result<Complex64> {
    kernel_kprime(vec2::reflect(x), nu_re, y, k)
}

/// Gradient of `Φ_k(·, y)` at `x`.
pub fn grad_phi_k(x: Point, y: Point, k: f64) -> Result<[Complex64; 2]> {
    let (d, r) = separation(x, y)?;
    let z = k * r;
    let f = -0.25 * I * k * Complex64::new(libm::j1(z), libm::y1(z)) / r;
    Ok([f * d[0], f * d[1]])
}

/// Split `K′(x, y) = smooth + log|x−y| · coeff` with `coeff = (k/2π) J₁(kr) ν·(x−y)/r`.
pub fn log_split_kprime(x: Point, nu_x: Point, y: Point, k: f64) -> Result<(Complex64, f64)> {
    let (d, r) = separation(x, y)?;
    let b = BesselSet::at(k * r);
    let c = vec2::dot(nu_x, d) / r;
    let full = -0.25 * I * k * c * b.h1();
    let coeff = k / (2.0 * PI) * b.j1 * c;
    Ok((full - coeff * r.ln(), coeff))
}

/// Diagonal limit of `K′` on a smooth curve: `ν·x″ / (4π|x′|²)`. The log coefficient vanishes there.
pub fn kprime_diagonal(nu: Point, d1: Point, d2: Point) -> f64 {
    vec2::dot(nu, d2) / (4.0 * PI * vec2::dot(d1, d1))
}

/// Split `Φ_k(x, y) = smooth + log|x−y| · coeff` with `coeff = −J₀(kr)/(2π)`.
pub fn log_split_single_layer(x: Point, y: Point, k: f64) -> Result<(Complex64, f64)> {
    let (_, r) = separation(x, y)?;
    let b = BesselSet::at(k * r);
    let coeff = -b.j0 / (2.0 * PI);
    Ok((0.25 * I * b.h0() - coeff * r.ln(), coeff))
}

/// Diagonal limits `(smooth, coeff)` of the single-layer split.
pub fn single_layer_diagonal(k: f64) -> (Complex64, f64) {
    (
        Complex64::new(-((0.5 * k).ln() + EULER_GAMMA) / (2.0 * PI), 0.25),
        -1.0 / (2.0 * PI),
    )
}
