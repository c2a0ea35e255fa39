//! Von Mises smoothing kernel on (−1, 1).
//!
//! The kernel is a von Mises density on the unit circle folded onto the
//! interval through `λ = cos θ`:
//!
//! ```text
//! K_κ(λ, λ') = [exp(κ cos(θ − μ)) + exp(κ cos(θ + μ))] / (2π I_0(κ) sqrt(1 − λ²)),
//! θ = arccos λ,  μ = arccos λ'.
//! ```
//!
//! As a function of its second argument it has the closed-form Chebyshev
//! expansion `K_κ(q, a) = J(q) Σ_k γ_k(q) T_k(a)` with `γ_0 = 1/π`,
//! `γ_k = (2/π) (I_k(κ)/I_0(κ)) cos(k arccos q)` and the Jacobian factor
//! `J(q) = 1/sqrt(1 − q²)`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_PI, PI};

use crate::bessel::{bessel_ratios, i0e, ratio_gaussian};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesParams {
    kappa: f64,
    center: f64,
}

impl VonMisesParams {
    pub fn new(kappa: f64, center: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(invalid("kappa", "must be positive and finite"));
        }
        check_open(center)?;
        Ok(VonMisesParams { kappa, center })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn center(&self) -> f64 {
        self.center
    }
}

fn check_open(v: f64) -> Result<()> {
    if !(v.abs() < 1.0) {
        return Err(Error::Domain { value: v });
    }
    Ok(())
}

/// `K_κ(λ, λ')` with `λ'` the kernel center. Integrates to one over `λ`.
pub fn kernel_eval(lambda: f64, params: VonMisesParams) -> Result<f64> {
    check_open(lambda)?;
    let theta = libm::acos(lambda);
    let mu = libm::acos(params.center);
    let kappa = params.kappa;
    // κ(cos d − 1) = −2κ sin²(d/2), exact for large κ
    let bump = |d: f64| {
        let s = libm::sin(0.5 * d);
        libm::exp(-2.0 * kappa * s * s)
    };
    let num = bump(theta - mu) + bump(theta + mu);
    let jac = libm::sqrt((1.0 - lambda) * (1.0 + lambda));
    Ok(num / (2.0 * PI * i0e(kappa) * jac))
}

/// `e^κ / I_0(κ)`, the upper bound on the proposal normalizer `π Σ|γ_k|`.
pub fn normalizer_bound(kappa: f64) -> f64 {
    1.0 / i0e(kappa)
}

/// Chebyshev coefficients `γ_0..γ_K` of a target function, times a constant
/// `jacobian` factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries {
    coeffs: Vec<f64>,
    tail_tol: f64,
    jacobian: f64,
}

impl CoefficientSeries {
    /// A plain series `Σ γ_k T_k` with no excluded tail.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("coeffs", "series must have at least one term"));
        }
        Ok(CoefficientSeries { coeffs, tail_tol: 0.0, jacobian: 1.0 })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn k_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Upper bound on `Σ_{k>K} |γ_k|` for the excluded tail.
    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn jacobian(&self) -> f64 {
        self.jacobian
    }
}

/// Closed-form von Mises coefficients for the query point `params.center`,
/// truncated at the first order whose remaining tail is below `tail_tol`.
///
/// The tail is bounded termwise by `(2/π) max(r_k, exp(−k²/2κ))` with `r_k`
/// the ratio actually used; the Gaussian alone does not dominate the exact
/// ratio far into the tail at moderate κ.
pub fn kernel_coeffs(params: VonMisesParams, tail_tol: f64) -> Result<CoefficientSeries> {
    if !(tail_tol > 0.0) {
        return Err(invalid("tail_tol", "must be positive"));
    }
    let kappa = params.kappa;
    let scale = 2.0 * FRAC_1_PI;
    let mut limit = libm::ceil(libm::sqrt(2.0 * kappa * libm::log(2.0 / (PI * tail_tol * 1e-4)))) as usize + 8;
    let (ratios, majorant) = loop {
        let ratios = bessel_ratios(limit, kappa);
        let majorant: Vec<f64> =
            (0..=limit).map(|k| scale * ratios[k].max(ratio_gaussian(k, kappa))).collect();
        if majorant[limit] <= 1e-4 * tail_tol {
            break (ratios, majorant);
        }
        limit *= 2;
    };
    let mut k_max = limit;
    let mut tail = 0.0;
    while k_max > 0 && tail + majorant[k_max] <= tail_tol {
        tail += majorant[k_max];
        k_max -= 1;
    }
    let mu = libm::acos(params.center);
    let mut coeffs = Vec::with_capacity(k_max + 1);
    coeffs.push(FRAC_1_PI);
    for (k, r) in ratios.iter().enumerate().take(k_max + 1).skip(1) {
        coeffs.push(scale * r * libm::cos(k as f64 * mu));
    }
    let c = params.center;
    Ok(CoefficientSeries { coeffs, tail_tol, jacobian: 1.0 / libm::sqrt((1.0 - c) * (1.0 + c)) })
}

/// `J Σ γ_k T_k(λ)` by Clenshaw summation.
pub fn series_eval(series: &CoefficientSeries, lambda: f64) -> Result<f64> {
    if !(lambda.abs() <= 1.0) {
        return Err(Error::Domain { value: lambda });
    }
    let c = &series.coeffs;
    let (mut b1, mut b2) = (0.0, 0.0);
    for &g in c[1..].iter().rev() {
        let b0 = g + 2.0 * lambda * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    Ok(series.jacobian * (c[0] + lambda * b1 - b2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::cheb_scalar;

    #[test]
    fn constant_term_is_one_over_pi() {
        for &(k, c) in &[(10.0, 0.0), (100.0, 0.5), (5000.0, -0.7)] {
            let s = kernel_coeffs(VonMisesParams::new(k, c).unwrap(), DEFAULT_TAIL_TOL).unwrap();
            assert_eq!(s.coeffs()[0], FRAC_1_PI);
        }
    }

    #[test]
    fn centered_series_has_no_odd_terms() {
        let s = kernel_coeffs(VonMisesParams::new(100.0, 0.0).unwrap(), 1e-12).unwrap();
        for (k, g) in s.coeffs().iter().enumerate().skip(1).step_by(2) {
            assert!(g.abs() < 1e-15, "γ_{k} = {g}");
        }
    }

    #[test]
    fn truncation_order_in_gaussian_regime() {
        let tol = 1e-12;
        let s = kernel_coeffs(VonMisesParams::new(5000.0, 0.2).unwrap(), tol).unwrap();
        let k = s.k_max();
        // independent tail sums of the Gaussian majorant
        let tail = |from: usize| -> f64 {
            (from..4000).map(|j| 2.0 / PI * libm::exp(-((j * j) as f64) / 10000.0)).sum()
        };
        assert!(tail(k + 1) <= tol);
        assert!(tail(k) > tol);
    }

    #[test]
    fn clenshaw_matches_direct_sum() {
        let s = CoefficientSeries::new(alloc::vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(series_eval(&s, 0.0).unwrap(), -1.0);
        let s = CoefficientSeries::new(alloc::vec![0.3, -0.2, 0.5, 0.1, -0.05]).unwrap();
        for &x in &[-0.9, -0.1, 0.4, 0.95] {
            let direct: f64 = s.coeffs().iter().enumerate().map(|(k, g)| g * cheb_scalar(k, x)).sum();
            assert!((series_eval(&s, x).unwrap() - direct).abs() < 1e-15);
        }
        assert!(series_eval(&s, 1.5).is_err());
    }

    #[test]
    fn series_reproduces_kernel_on_diagonal() {
        let p = VonMisesParams::new(100.0, 0.3).unwrap();
        let s = kernel_coeffs(p, 1e-12).unwrap();
        let direct = kernel_eval(0.3, p).unwrap();
        assert!((series_eval(&s, 0.3).unwrap() - direct).abs() < 1e-6);
    }

    #[test]
    fn endpoints_are_rejected() {
        let p = VonMisesParams::new(10.0, 0.0).unwrap();
        assert!(kernel_eval(1.0, p).is_err());
        assert!(kernel_eval(-1.0, p).is_err());
        assert!(VonMisesParams::new(10.0, 1.0).is_err());
        assert!(VonMisesParams::new(0.0, 0.0).is_err());
    }

    #[test]
    fn centered_kernel_is_even() {
        let p = VonMisesParams::new(50.0, 0.0).unwrap();
        for &x in &[0.01, 0.2, 0.7, 0.99] {
            let a = kernel_eval(x, p).unwrap();
            let b = kernel_eval(-x, p).unwrap();
            assert!((a - b).abs() <= 1e-10 * a);
        }
    }
}
