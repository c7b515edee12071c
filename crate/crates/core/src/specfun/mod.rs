//! Special functions and quadrature rules used by every kernel evaluation.

mod bessel;
mod quadrature;

pub use bessel::{bessel_j0j1, bessel_y0y1, hankel1, BesselSet, J0_FIRST_ZERO};
pub use quadrature::{
    barycentric_weights, differentiation_matrix, gauss_legendre, gl16, interpolation_matrix,
    legendre_log_moments, legendre_values, log_product_weights, QuadratureRule, PANEL_ORDER,
};
