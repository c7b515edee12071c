use num_complex::Complex64;

use crate::{Error, Result};

/// First positive zero of `J0`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

fn check_argument(x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!(
            "Bessel argument must be finite and positive, got {x}"
        )));
    }
    Ok(())
}

/// Returns `(J0(x), J1(x))` for `x > 0`.
pub fn bessel_j0j1(x: f64) -> Result<(f64, f64)> {
    check_argument(x)?;
    Ok((libm::j0(x), libm::j1(x)))
}

/// Returns `(Y0(x), Y1(x))` for `x > 0`.
pub fn bessel_y0y1(x: f64) -> Result<(f64, f64)> {
    check_argument(x)?;
    Ok((libm::y0(x), libm::y1(x)))
}

/// Hankel function of the first kind `H_n^(1)(x) = J_n(x) + i Y_n(x)`, `n ∈ {0, 1}`.
pub fn hankel1(order: u32, x: f64) -> Result<Complex64> {
    check_argument(x)?;
    match order {
        0 => Ok(Complex64::new(libm::j0(x), libm::y0(x))),
        1 => Ok(Complex64::new(libm::j1(x), libm::y1(x))),
        _ => Err(Error::Domain(format!(
            "only Hankel orders 0 and 1 are supported, got {order}"
        ))),
    }
}

/// All four real Bessel values at one argument. Used on the hot assembly path,
/// where the argument is known to be positive.
#[derive(Clone, Copy, Debug)]
pub struct BesselSet {
    pub j0: f64,
    pub j1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl BesselSet {
    #[inline]
    pub fn at(x: f64) -> Self {
        debug_assert!(x > 0.0);
        Self {
            j0: libm::j0(x),
            j1: libm::j1(x),
            y0: libm::y0(x),
            y1: libm::y1(x),
        }
    }

    #[inline]
    pub fn h0(&self) -> Complex64 {
        Complex64::new(self.j0, self.y0)
    }

    #[inline]
    pub fn h1(&self) -> Complex64 {
        Complex64::new(self.j1, self.y1)
    }
}
