//! Fraction of negative eigenvalues of a Wigner + Wishart mixture.

use core::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use super::random::MixtureSpec;

/// The closed-form index `α(ε)` for aspect ratio `φ`, clamped at zero.
///
/// Intermediate quantities are complex when `χ₁² < 2χ₂³`; principal branches
/// are used throughout and the (negligible) imaginary part of the result is
/// dropped.
pub fn index_formula(eps: f64, phi: f64) -> f64 {
    if !(eps > 0.0) {
        return 0.0;
    }
    let e = Complex64::new(eps, 0.0);
    let chi1 = 4.0 * eps.powi(3) + 9.0 * eps * eps * phi + 18.0 * eps * eps * phi * phi;
    let chi2 = 2.0 * eps * eps + 3.0 * eps * phi - 3.0 * eps * phi * phi;
    let rad = Complex64::new(chi1 * chi1 - 2.0 * chi2.powi(3), 0.0).sqrt();
    let xi = libm::pow(2.0, -1.0 / 6.0) * (chi1 + rad).powf(1.0 / 3.0);
    let xi_p = xi * xi + chi2;
    let xi_m = xi * xi - chi2;
    let s3 = libm::sqrt(3.0);
    let d1 = xi_p - 2.0 * SQRT_2 * xi * e;
    let d2 = xi_p + 4.0 * SQRT_2 * xi * e;
    let first = xi_m * d1 / (12.0 * s3 * xi * xi * phi * phi * e);
    let value = first + (s3 * xi_m / d1).atan() - (s3 * xi_m / d2).atan() / phi;
    (value.re / PI).max(0.0)
}

/// Limiting negative-eigenvalue fraction of `γW + (1−γ)C` with the sampler
/// normalizations of [`super::random`].
///
/// The closed form is written for a Wigner part four times the variance of
/// the sampled one, so it is evaluated at `ε/4`.
pub fn ww_index(mix: MixtureSpec) -> f64 {
    if mix.gamma <= 0.0 {
        return 0.0;
    }
    if mix.gamma >= 1.0 {
        return 0.5;
    }
    index_formula(mix.epsilon() / 4.0, mix.phi).min(0.5)
}
