//! Wigner, Wishart and Wigner+Wishart mixture samplers.

use alloc::vec;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::operator::DenseSymmetric;
use crate::rng::{normal, Stream};

fn check_budget(required: u64, budget_bytes: u64) -> Result<()> {
    if required > budget_bytes {
        return Err(Error::BudgetExceeded { required_bytes: required, budget_bytes });
    }
    Ok(())
}

fn dense_bytes(rows: usize, cols: usize) -> u64 {
    rows as u64 * cols as u64 * 8
}

/// Symmetric Gaussian matrix with off-diagonal variance `1/(4D)` and diagonal
/// variance `1/(2D)`; its spectrum fills `[−1, 1]` as `D` grows.
pub fn wigner_sample(d: usize, budget_bytes: u64, rng: &mut Stream) -> Result<DenseSymmetric> {
    if d == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    check_budget(dense_bytes(d, d), budget_bytes)?;
    let off = libm::sqrt(1.0 / (4.0 * d as f64));
    let diag = libm::sqrt(1.0 / (2.0 * d as f64));
    let mut data = vec![0.0; d * d];
    for i in 0..d {
        data[i * d + i] = diag * normal(rng);
        for j in i + 1..d {
            let v = off * normal(rng);
            data[i * d + j] = v;
            data[j * d + i] = v;
        }
    }
    DenseSymmetric::from_row_major(d, data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WishartSpec {
    pub d: usize,
    pub n: usize,
    pub sigma2: f64,
}

impl WishartSpec {
    pub fn new(d: usize, n: usize, sigma2: f64) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(invalid("wishart", "dimensions must be at least 1"));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(invalid("sigma2", "must be positive and finite"));
        }
        Ok(WishartSpec { d, n, sigma2 })
    }

    /// Spec with `N = round(D/φ)`.
    pub fn from_ratio(d: usize, phi: f64, sigma2: f64) -> Result<Self> {
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(invalid("phi", "must be positive and finite"));
        }
        let n = libm::round(d as f64 / phi) as usize;
        Self::new(d, n.max(1), sigma2)
    }

    /// `φ = D/N`.
    pub fn phi(&self) -> f64 {
        self.d as f64 / self.n as f64
    }
}

fn wishart_dense(spec: WishartSpec, rng: &mut Stream) -> DMatrix<f64> {
    let sd = libm::sqrt(spec.sigma2 / spec.n as f64);
    let b = DMatrix::from_fn(spec.d, spec.n, |_, _| sd * normal(rng));
    let mut a = &b * b.transpose();
    // the product is symmetric up to summation order; make it exact
    for i in 0..spec.d {
        for j in i + 1..spec.d {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

fn to_operator(m: DMatrix<f64>) -> Result<DenseSymmetric> {
    let d = m.nrows();
    // column-major storage of a symmetric matrix doubles as row-major
    DenseSymmetric::from_row_major(d, m.as_slice().to_vec())
}

/// `BBᵀ` with `B_ij ~ N(0, σ²/N)`.
pub fn wishart_sample(spec: WishartSpec, budget_bytes: u64, rng: &mut Stream) -> Result<DenseSymmetric> {
    check_budget(dense_bytes(spec.d, spec.d) * 2 + dense_bytes(spec.d, spec.n), budget_bytes)?;
    to_operator(wishart_dense(spec, rng))
}

/// `H = γ W + (1 − γ) C` with `W` Wigner and `C` Wishart with `σ² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSpec {
    pub gamma: f64,
    pub phi: f64,
}

impl MixtureSpec {
    pub fn new(gamma: f64, phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid("gamma", "must lie in [0, 1]"));
        }
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(invalid("phi", "must be positive and finite"));
        }
        Ok(MixtureSpec { gamma, phi })
    }

    /// `ε = γ² / (2(1 − γ)²)`; infinite at `γ = 1`.
    pub fn epsilon(&self) -> f64 {
        let g = self.gamma;
        if g == 1.0 {
            return f64::INFINITY;
        }
        g * g / (2.0 * (1.0 - g) * (1.0 - g))
    }
}

pub fn mixture_sample(spec: MixtureSpec, d: usize, budget_bytes: u64, rng: &mut Stream) -> Result<DenseSymmetric> {
    let w = WishartSpec::from_ratio(d, spec.phi, 1.0)?;
    check_budget(dense_bytes(d, d) * 3 + dense_bytes(d, w.n), budget_bytes)?;
    let wigner = wigner_sample(d, u64::MAX, rng)?;
    let mut h = DMatrix::from_row_slice(d, d, wigner.as_slice()) * spec.gamma;
    if spec.gamma < 1.0 {
        h += wishart_dense(w, rng) * (1.0 - spec.gamma);
    }
    to_operator(h)
}
