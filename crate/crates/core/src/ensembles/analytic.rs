//! Limiting spectral laws, their moments and Chebyshev traces, and
//! kernel-smoothed reference densities.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::operator::Axis;
use crate::quad::integrate;
use crate::vonmises::{kernel_eval, VonMisesParams};

/// Catalan number `C_j` as a float.
pub fn catalan(j: u64) -> f64 {
    (0..j).fold(1.0, |c, i| c * 2.0 * (2 * i + 1) as f64 / (i + 2) as f64)
}

/// `C(n, k)` as a float, zero outside `0 ≤ k ≤ n`.
fn binom_f(n: u64, k: i64) -> f64 {
    if k < 0 || k as u64 > n {
        return 0.0;
    }
    let k = k as u64;
    (0..k.min(n - k)).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64)
}

pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    2.0 / PI * libm::sqrt((1.0 - x) * (1.0 + x))
}

pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    0.5 + (x * libm::sqrt(1.0 - x * x) + libm::asin(x)) / PI
}

/// `4^{−k/2} C_{k/2}` for even `k`, zero for odd `k`.
pub fn semicircle_moment(k: u64) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    catalan(k / 2) / libm::pow(4.0, (k / 2) as f64)
}

/// Limiting `(1/D) tr T_k` of a Wigner matrix: `δ_{0k} − δ_{2k}/2`.
pub fn semicircle_cheb_trace(k: u64) -> f64 {
    match k {
        0 => 1.0,
        2 => -0.5,
        _ => 0.0,
    }
}

/// `(λ_−, λ_+) = σ²(1 ∓ √φ)²`.
pub fn mp_support(phi: f64, sigma2: f64) -> (f64, f64) {
    let r = libm::sqrt(phi);
    (sigma2 * (1.0 - r) * (1.0 - r), sigma2 * (1.0 + r) * (1.0 + r))
}

/// Continuous part of the Marchenko–Pastur law.
pub fn mp_density(x: f64, phi: f64, sigma2: f64) -> f64 {
    let (a, b) = mp_support(phi, sigma2);
    if x <= a || x >= b || x <= 0.0 {
        return 0.0;
    }
    libm::sqrt((b - x) * (x - a)) / (2.0 * PI * sigma2 * phi * x)
}

/// Point mass at zero, `1 − 1/φ` when `φ > 1`.
pub fn mp_atom(phi: f64) -> f64 {
    if phi > 1.0 {
        1.0 - 1.0 / phi
    } else {
        0.0
    }
}

/// Narayana number `N(k, j) = C(k, j) C(k, j−1) / k`.
pub fn narayana(k: u64, j: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    binom_f(k, j as i64) * binom_f(k, j as i64 - 1) / k as f64
}

/// `σ^{2k} Σ_{j<k} N(k, j+1) φ^j`.
pub fn mp_moment(k: u64, phi: f64, sigma2: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let s: f64 = (0..k).map(|j| narayana(k, j + 1) * libm::pow(phi, j as f64)).sum();
    libm::pow(sigma2, k as f64) * s
}

/// `(α, β)` mapping the Marchenko–Pastur support onto `[−1, 1]` via `αλ + β`.
pub fn mp_shift(phi: f64, sigma2: f64) -> (f64, f64) {
    let r = libm::sqrt(phi);
    (1.0 / (2.0 * sigma2 * r), -(1.0 + phi) / (2.0 * r))
}

/// Limiting `(1/D) tr T_k(αA + β)` for a Wishart `A` after [`mp_shift`]:
/// `1`, `−√φ/2`, then `−(1−φ)(−√φ)^{k−2}/2`.
pub fn mp_shifted_cheb_trace(k: u64, phi: f64) -> Result<f64> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(invalid("phi", "shifted traces need 0 < φ < 1"));
    }
    let r = libm::sqrt(phi);
    Ok(match k {
        0 => 1.0,
        1 => -0.5 * r,
        _ => -0.5 * (1.0 - phi) * libm::pow(-r, (k - 2) as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuousLaw {
    Semicircle,
    MarchenkoPastur { phi: f64, sigma2: f64 },
}

impl ContinuousLaw {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ContinuousLaw::Semicircle => (-1.0, 1.0),
            ContinuousLaw::MarchenkoPastur { phi, sigma2 } => mp_support(phi, sigma2),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            ContinuousLaw::Semicircle => semicircle_density(x),
            ContinuousLaw::MarchenkoPastur { phi, sigma2 } => mp_density(x, phi, sigma2),
        }
    }

    pub fn atom(&self) -> f64 {
        match *self {
            ContinuousLaw::Semicircle => 0.0,
            ContinuousLaw::MarchenkoPastur { phi, .. } => mp_atom(phi),
        }
    }

    /// `∫ g(x) ψ(x) dx` over the support, via `x = c − h cos s`, which removes
    /// the square-root edges. `split` adds an interior break point in `x`.
    fn integrate_against<F: FnMut(f64) -> f64>(&self, mut g: F, upper: f64, split: Option<f64>, tol: f64) -> f64 {
        let (a, b) = self.support();
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let to_s = |x: f64| libm::acos(((c - x) / h).clamp(-1.0, 1.0));
        let top = to_s(upper.min(b));
        if upper <= a {
            return 0.0;
        }
        let mut f = |s: f64| {
            let x = c - h * libm::cos(s);
            g(x) * self.density(x) * h * libm::sin(s)
        };
        match split.map(to_s) {
            Some(m) if m > 0.0 && m < top => integrate(&mut f, 0.0, m, tol, 4000) + integrate(&mut f, m, top, tol, 4000),
            _ => integrate(&mut f, 0.0, top, tol, 4000),
        }
    }

    /// Distribution function including the atom.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ContinuousLaw::Semicircle => semicircle_cdf(x),
            ContinuousLaw::MarchenkoPastur { .. } => {
                let atom = if x >= 0.0 { self.atom() } else { 0.0 };
                atom + self.integrate_against(|_| 1.0, x, None, 1e-13)
            }
        }
    }
}

/// A spectrum known in closed form, on the axis of some operator.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticSpectrum {
    Discrete { pairs: Vec<(f64, u64)> },
    Continuous { law: ContinuousLaw, axis: Axis },
}

impl AnalyticSpectrum {
    pub fn discrete(pairs: Vec<(f64, u64)>) -> Self {
        AnalyticSpectrum::Discrete { pairs }
    }

    pub fn continuous(law: ContinuousLaw) -> Self {
        AnalyticSpectrum::Continuous { law, axis: Axis::IDENTITY }
    }

    pub fn pairs(&self) -> Option<&[(f64, u64)]> {
        match self {
            AnalyticSpectrum::Discrete { pairs } => Some(pairs),
            AnalyticSpectrum::Continuous { .. } => None,
        }
    }

    /// Total multiplicity of a discrete spectrum.
    pub fn dim(&self) -> Option<u64> {
        self.pairs().map(|p| p.iter().map(|e| e.1).sum())
    }

    /// The same spectrum seen through `axis` (applied after any existing map).
    pub fn map(&self, axis: Axis) -> Self {
        match self {
            AnalyticSpectrum::Discrete { pairs } => {
                AnalyticSpectrum::Discrete { pairs: pairs.iter().map(|&(v, m)| (axis.forward(v), m)).collect() }
            }
            AnalyticSpectrum::Continuous { law, axis: a } => {
                AnalyticSpectrum::Continuous { law: *law, axis: a.compose(axis) }
            }
        }
    }

    /// Smallest and largest spectral value on this axis.
    pub fn support(&self) -> (f64, f64) {
        match self {
            AnalyticSpectrum::Discrete { pairs } => pairs
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(v, _)| (lo.min(v), hi.max(v))),
            AnalyticSpectrum::Continuous { law, axis } => {
                let (a, b) = law.support();
                let (u, v) = (axis.forward(a), axis.forward(b));
                let (u, v) = (u.min(v), u.max(v));
                if law.atom() > 0.0 {
                    let z = axis.forward(0.0);
                    (u.min(z), v.max(z))
                } else {
                    (u, v)
                }
            }
        }
    }

    /// Fraction of the spectrum at or below `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            AnalyticSpectrum::Discrete { pairs } => {
                let total: u64 = pairs.iter().map(|p| p.1).sum();
                let below: u64 = pairs.iter().filter(|p| p.0 <= t).map(|p| p.1).sum();
                below as f64 / total as f64
            }
            AnalyticSpectrum::Continuous { law, axis } => {
                let x = axis.inverse(t);
                if axis.scale > 0.0 {
                    law.cdf(x)
                } else {
                    1.0 - law.cdf(x)
                }
            }
        }
    }

    /// Fraction of strictly negative eigenvalues on this axis.
    pub fn negative_fraction(&self) -> f64 {
        match self {
            AnalyticSpectrum::Discrete { pairs } => {
                let total: u64 = pairs.iter().map(|p| p.1).sum();
                pairs.iter().filter(|p| p.0 < 0.0).map(|p| p.1).sum::<u64>() as f64 / total as f64
            }
            AnalyticSpectrum::Continuous { .. } => self.cdf(-f64::MIN_POSITIVE),
        }
    }
}

/// The κ-smoothed density `(1/D) Σ_d K_κ(λ, λ_d)` of a spectrum at each grid
/// point; continuous laws are convolved with the kernel by quadrature.
pub fn smoothed_truth(spectrum: &AnalyticSpectrum, kappa: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = spectrum.support();
    if !(lo > -1.0) {
        return Err(Error::Domain { value: lo });
    }
    if !(hi < 1.0) {
        return Err(Error::Domain { value: hi });
    }
    match spectrum {
        AnalyticSpectrum::Discrete { pairs } => {
            let total: u64 = pairs.iter().map(|p| p.1).sum();
            let params: Vec<(VonMisesParams, f64)> = pairs
                .iter()
                .map(|&(v, m)| Ok((VonMisesParams::new(kappa, v)?, m as f64 / total as f64)))
                .collect::<Result<_>>()?;
            grid.iter()
                .map(|&l| params.iter().map(|&(p, w)| Ok(w * kernel_eval(l, p)?)).sum())
                .collect()
        }
        AnalyticSpectrum::Continuous { law, axis } => {
            let atom = law.atom();
            let atom_params = if atom > 0.0 { Some(VonMisesParams::new(kappa, axis.forward(0.0))?) } else { None };
            VonMisesParams::new(kappa, 0.0)?;
            grid.iter()
                .map(|&l| {
                    let mut failed = None;
                    let conv = law.integrate_against(
                        |x| match VonMisesParams::new(kappa, axis.forward(x)).and_then(|p| kernel_eval(l, p)) {
                            Ok(v) => v,
                            Err(e) => {
                                failed = Some(e);
                                0.0
                            }
                        },
                        f64::INFINITY,
                        Some(axis.inverse(l)),
                        1e-10,
                    );
                    if let Some(e) = failed {
                        return Err(e);
                    }
                    let spike = match atom_params {
                        Some(p) => atom * kernel_eval(l, p)?,
                        None => 0.0,
                    };
                    Ok(conv + spike)
                })
                .collect()
        }
    }
}
