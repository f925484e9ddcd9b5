//! Special functions and quadrature rules.

mod adaptive;
mod bessel;
mod interp;
mod quadrature;

pub use adaptive::{integrate_adaptive, integrate_with_breaks, AdaptiveResult};
pub use bessel::{bessel_i0_scaled, bessel_i1_scaled, bessel_j0, i1_scaled_over_x};
pub use interp::{lagrange_weights, stencil_start};
pub use quadrature::{gauss_legendre, standard_rule, QuadratureRule, StandardRule};

/// Error function (libm backs erf/erfc; both are accurate to a few ulp).
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function, accurate in the far tail where `1 - erf` cancels.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}
