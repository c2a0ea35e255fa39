//! Proposals over polynomial order and importance-sampled series estimates.

use alloc::vec;
use alloc::vec::Vec;

use crate::chebyshev::{bound_second_moment, ChebRecursion, VarianceBoundParams};
use crate::error::{invalid, Error, Result};
use crate::linalg::dot;
use crate::operator::LinearOperator;
use crate::rng::{uniform, Stream};
use crate::vonmises::CoefficientSeries;

/// Distribution `q_0..q_K` over orders together with the signed weights
/// `γ_k / q_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    coeffs: Vec<f64>,
    masses: Vec<f64>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
    survival: Vec<f64>,
    normalizer: f64,
}

impl Proposal {
    fn from_scores(coeffs: &[f64], scores: Vec<f64>) -> Result<Self> {
        let normalizer: f64 = scores.iter().sum();
        if !normalizer.is_finite() {
            return Err(Error::InfiniteNormalizer(alloc::format!("sum of proposal scores is {normalizer}")));
        }
        if normalizer == 0.0 {
            return Err(Error::ZeroSeries);
        }
        let masses: Vec<f64> = scores.iter().map(|s| s / normalizer).collect();
        for (k, (&g, &q)) in coeffs.iter().zip(&masses).enumerate() {
            if (g != 0.0) != (q > 0.0) {
                return Err(invalid("proposal", alloc::format!("support mismatch at order {k}")));
            }
        }
        let weights = coeffs.iter().zip(&masses).map(|(&g, &q)| if q > 0.0 { g / q } else { 0.0 }).collect();

        let mut cdf = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for &q in &masses {
            acc += q;
            cdf.push(acc);
        }
        let last = masses.iter().rposition(|&q| q > 0.0).unwrap_or(0);
        cdf[last..].iter_mut().for_each(|c| *c = 1.0);

        // suffix sums avoid the cancellation in 1 − Σ_{ℓ<j} q_ℓ
        let mut survival = vec![0.0; masses.len()];
        let mut tail = 0.0;
        for k in (0..masses.len()).rev() {
            tail += masses[k];
            survival[k] = tail;
        }
        Ok(Proposal { coeffs: coeffs.to_vec(), masses, weights, cdf, survival, normalizer })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Sum of the unnormalized scores, `Σ|γ_k|` for [`build_proposal`].
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn k_max(&self) -> usize {
        self.masses.len() - 1
    }

    /// `P(k ≥ j) = Σ_{ℓ ≥ j} q_ℓ`.
    pub fn survival(&self, j: usize) -> f64 {
        self.survival.get(j).copied().unwrap_or(0.0)
    }
}

/// `q_k ∝ |γ_k|`.
pub fn build_proposal(series: &CoefficientSeries) -> Result<Proposal> {
    let c = series.coeffs();
    Proposal::from_scores(c, c.iter().map(|g| g.abs()).collect())
}

/// `q*_k ∝ |γ_k| sqrt(m_k)` with `m_k` the second moments `E‖T̂_k‖²_F`.
pub fn optimal_proposal(series: &CoefficientSeries, second_moments: &[f64]) -> Result<Proposal> {
    let c = series.coeffs();
    if second_moments.len() != c.len() {
        return Err(Error::DimensionMismatch { expected: c.len(), got: second_moments.len() });
    }
    let mut scores = Vec::with_capacity(c.len());
    for (k, (&g, &m)) in c.iter().zip(second_moments).enumerate() {
        if g != 0.0 && !(m > 0.0) {
            return Err(invalid("second_moments", alloc::format!("must be positive at order {k}")));
        }
        scores.push(if g == 0.0 { 0.0 } else { g.abs() * libm::sqrt(m) });
    }
    Proposal::from_scores(c, scores)
}

/// Second moments from the bound `D α^k`, for use with [`optimal_proposal`].
pub fn bounded_second_moments(params: VarianceBoundParams, k_max: usize) -> Vec<f64> {
    (0..=k_max).map(|k| bound_second_moment(params, k)).collect()
}

/// Draws `k ~ q` and returns `(k, γ_k / q_k)`.
pub fn sample_index(p: &Proposal, rng: &mut Stream) -> (usize, f64) {
    let u = uniform(rng);
    let k = p.cdf.partition_point(|&c| c <= u).min(p.k_max());
    (k, p.weights[k])
}

/// Randomized-truncation estimate of `xᵀ F x`: draws a stopping order `k ~ q`
/// and returns `γ_0 xᵀx + Σ_{j=1}^{k} γ_j xᵀT̂_j x / P(k ≥ j)`.
pub fn truncation_estimate<O: LinearOperator + ?Sized>(
    op: &O,
    x: &[f64],
    p: &Proposal,
    rng: &mut Stream,
) -> Result<f64> {
    let (k, _) = sample_index(p, rng);
    let mut rec = ChebRecursion::new(op, x)?;
    let mut value = p.coeffs[0] * dot(x, x);
    for j in 1..=k {
        let s = p.survival(j);
        if !(s >= f64::MIN_POSITIVE) {
            return Err(Error::SurvivalUnderflow { level: j });
        }
        let t = rec.advance(rng);
        value += p.coeffs[j] * dot(x, t) / s;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::cheb_scalar;
    use crate::rng::stream;
    use crate::stats::RunningStats;
    use crate::vonmises::{kernel_coeffs, VonMisesParams};
    use core::f64::consts::FRAC_1_PI;

    #[test]
    fn two_equal_masses() {
        let s = CoefficientSeries::new(vec![FRAC_1_PI, 0.0, FRAC_1_PI]).unwrap();
        let p = build_proposal(&s).unwrap();
        assert_eq!(p.masses(), &[0.5, 0.0, 0.5]);
        assert!((p.weights()[0] - 2.0 * FRAC_1_PI).abs() < 1e-15);
        assert!((p.weights()[2] - 2.0 * FRAC_1_PI).abs() < 1e-15);
    }

    #[test]
    fn zero_series_rejected() {
        let s = CoefficientSeries::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(build_proposal(&s), Err(Error::ZeroSeries)));
    }

    #[test]
    fn optimal_arithmetic() {
        let s = CoefficientSeries::new(vec![1.0, 1.0]).unwrap();
        let p = optimal_proposal(&s, &[1.0, 4.0]).unwrap();
        assert!((p.masses()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.masses()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(optimal_proposal(&s, &[1.0, 0.0]).is_err());
        assert!(matches!(optimal_proposal(&s, &[1.0, f64::INFINITY]), Err(Error::InfiniteNormalizer(_))));
    }

    #[test]
    fn uniform_moments_reduce_to_abs_proposal() {
        let s = kernel_coeffs(VonMisesParams::new(100.0, 0.3).unwrap(), 1e-12).unwrap();
        let a = build_proposal(&s).unwrap();
        let b = optimal_proposal(&s, &vec![7.0; s.coeffs().len()]).unwrap();
        for (x, y) in a.masses().iter().zip(b.masses()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_proposal_always_hits() {
        let mut c = vec![0.0; 6];
        c[5] = -0.25;
        let p = build_proposal(&CoefficientSeries::new(c).unwrap()).unwrap();
        let mut rng = stream(3, 0, 0);
        for _ in 0..100 {
            assert_eq!(sample_index(&p, &mut rng), (5, -0.25));
        }
    }

    #[test]
    fn odd_masses_vanish_for_centered_kernel() {
        let s = kernel_coeffs(VonMisesParams::new(100.0, 0.0).unwrap(), 1e-12).unwrap();
        let p = build_proposal(&s).unwrap();
        let odd: f64 = p.masses().iter().skip(1).step_by(2).sum();
        assert!(odd < 1e-14);
        let sum: f64 = p.masses().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalizer_below_bound() {
        for &kappa in &[10.0, 100.0, 1000.0, 5000.0] {
            for &c in &[-0.9, -0.3, 0.0, 0.5, 0.99] {
                let s = kernel_coeffs(VonMisesParams::new(kappa, c).unwrap(), 1e-12).unwrap();
                let p = build_proposal(&s).unwrap();
                let z = core::f64::consts::PI * p.normalizer();
                assert!(z <= crate::vonmises::normalizer_bound(kappa) * (1.0 + 1e-12), "κ={kappa} c={c} Z={z}");
            }
        }
    }

    #[test]
    fn scalar_importance_estimate_is_unbiased() {
        let s = kernel_coeffs(VonMisesParams::new(30.0, 0.1).unwrap(), 1e-12).unwrap();
        let p = build_proposal(&s).unwrap();
        let a = 0.3;
        let target: f64 = s.coeffs().iter().enumerate().map(|(k, g)| g * cheb_scalar(k, a)).sum();
        let mut rng = stream(11, 0, 0);
        let stats: RunningStats = (0..200_000)
            .map(|_| {
                let (k, w) = sample_index(&p, &mut rng);
                w * cheb_scalar(k, a)
            })
            .collect();
        assert!(stats.estimate().z_score(target).abs() < 5.0);
    }

    #[test]
    fn truncation_with_point_mass_at_zero() {
        let s = CoefficientSeries::new(vec![0.7]).unwrap();
        let p = build_proposal(&s).unwrap();
        let d = crate::operator::Diagonal::new(vec![0.2, 0.4]).unwrap();
        let mut rng = stream(1, 1, 1);
        let v = truncation_estimate(&d, &[1.0, 2.0], &p, &mut rng).unwrap();
        assert!((v - 0.7 * 5.0).abs() < 1e-15);
    }
}
