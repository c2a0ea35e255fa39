//! Randomized trace and diagonal estimation with optional control variates.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg::dot;
use crate::operator::{check_dim, LinearOperator};
use crate::rng::{normal, rademacher, Stream};
use crate::stats::{MeanEstimate, RunningStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbeDistribution {
    #[default]
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeSpec {
    pub distribution: ProbeDistribution,
    pub dim: usize,
}

impl ProbeSpec {
    pub fn new(distribution: ProbeDistribution, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "probe dimension must be at least 1"));
        }
        Ok(ProbeSpec { distribution, dim })
    }
}

pub fn probe_into(distribution: ProbeDistribution, x: &mut [f64], rng: &mut Stream) {
    match distribution {
        ProbeDistribution::Gaussian => x.iter_mut().for_each(|e| *e = normal(rng)),
        ProbeDistribution::Rademacher => x.iter_mut().for_each(|e| *e = rademacher(rng)),
    }
}

/// One probe with independent zero-mean, unit-variance components.
pub fn probe(spec: ProbeSpec, rng: &mut Stream) -> Vec<f64> {
    let mut x = vec![0.0; spec.dim];
    probe_into(spec.distribution, &mut x, rng);
    x
}

fn check_count(n: usize) -> Result<()> {
    if n < 2 {
        return Err(invalid("n", "need at least two probes"));
    }
    Ok(())
}

/// Skilling–Hutchinson estimate of `tr A` from `n` probes.
pub fn sh_trace<O: LinearOperator + ?Sized>(op: &O, spec: ProbeSpec, n: usize, rng: &mut Stream) -> Result<MeanEstimate> {
    check_count(n)?;
    check_dim(op.dim(), spec.dim)?;
    let mut x = vec![0.0; spec.dim];
    let mut y = vec![0.0; spec.dim];
    let mut stats = RunningStats::new();
    for _ in 0..n {
        probe_into(spec.distribution, &mut x, rng);
        op.apply_into(&x, &mut y, rng);
        stats.push(dot(&x, &y));
    }
    Ok(stats.estimate())
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let asym = (a - a.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::Asymmetric(asym));
    }
    Ok(())
}

/// Largest dimension accepted by the dense validation helpers.
pub const QF_DENSE_LIMIT: usize = 512;

/// `2‖A‖²_F`, the variance of `xᵀAx` under Gaussian probes.
pub fn qf_variance_dense(a: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(a)?;
    if a.nrows() > QF_DENSE_LIMIT {
        return Err(Error::TooLargeForDense { dim: a.nrows(), max: QF_DENSE_LIMIT });
    }
    Ok(2.0 * a.iter().map(|v| v * v).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlKind {
    ScaledIdentity(f64),
    Diagonal(Vec<f64>),
}

/// Zero-mean correction `c (xᵀBx − tr B)` with `B` a scaled identity or a
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVariate {
    kind: ControlKind,
    dim: usize,
    trace_b: f64,
    c: f64,
}

impl ControlVariate {
    pub fn scaled_identity(alpha: f64, dim: usize, c: f64) -> Self {
        ControlVariate { kind: ControlKind::ScaledIdentity(alpha), dim, trace_b: alpha * dim as f64, c }
    }

    pub fn diagonal(values: Vec<f64>, c: f64) -> Self {
        let trace_b = values.iter().sum();
        let dim = values.len();
        ControlVariate { kind: ControlKind::Diagonal(values), dim, trace_b, c }
    }

    pub fn kind(&self) -> &ControlKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trace_b(&self) -> f64 {
        self.trace_b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ControlKind::ScaledIdentity(a) => a * dot(x, x),
            ControlKind::Diagonal(d) => d.iter().zip(x).map(|(d, x)| d * x * x).sum(),
        }
    }

    /// `c (xᵀBx − tr B)`.
    pub fn correction(&self, x: &[f64]) -> f64 {
        self.c * (self.quad_form(x) - self.trace_b)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.kind {
            ControlKind::ScaledIdentity(a) => DMatrix::identity(self.dim, self.dim) * *a,
            ControlKind::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
        }
    }
}

/// Mean of `xᵀÂx − c (xᵀBx − tr B)` over `n` probes.
pub fn cv_trace<O: LinearOperator + ?Sized>(
    op: &O,
    cv: &ControlVariate,
    spec: ProbeSpec,
    n: usize,
    rng: &mut Stream,
) -> Result<MeanEstimate> {
    check_count(n)?;
    check_dim(op.dim(), spec.dim)?;
    check_dim(op.dim(), cv.dim)?;
    let mut x = vec![0.0; spec.dim];
    let mut y = vec![0.0; spec.dim];
    let mut stats = RunningStats::new();
    for _ in 0..n {
        probe_into(spec.distribution, &mut x, rng);
        op.apply_into(&x, &mut y, rng);
        stats.push(dot(&x, &y) - cv.correction(&x));
    }
    Ok(stats.estimate())
}

fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // tr(AB) = Σ_ij A_ij B_ji
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

/// `c* = tr(AB) / tr(B²)`.
pub fn optimal_c_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.nrows() });
    }
    let bb = trace_product(b, b);
    if bb == 0.0 {
        return Err(Error::ZeroDenominator("tr(B²)"));
    }
    Ok(trace_product(a, b) / bb)
}

/// `4c tr(AB) − 2c² tr(B²)`, the drop in Gaussian-probe variance.
pub fn variance_reduction(a: &DMatrix<f64>, b: &DMatrix<f64>, c: f64) -> f64 {
    4.0 * c * trace_product(a, b) - 2.0 * c * c * trace_product(b, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEstimate {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: u64,
}

/// Running mean of `x ⊙ Âx`, unbiased for `diag(A)`.
pub fn diag_estimate<O: LinearOperator + ?Sized>(
    op: &O,
    spec: ProbeSpec,
    n: usize,
    rng: &mut Stream,
) -> Result<DiagonalEstimate> {
    if n == 0 {
        return Err(invalid("n", "need at least one probe"));
    }
    check_dim(op.dim(), spec.dim)?;
    let mut x = vec![0.0; spec.dim];
    let mut y = vec![0.0; spec.dim];
    let mut stats = vec![RunningStats::new(); spec.dim];
    for _ in 0..n {
        probe_into(spec.distribution, &mut x, rng);
        op.apply_into(&x, &mut y, rng);
        for ((s, a), b) in stats.iter_mut().zip(&x).zip(&y) {
            s.push(a * b);
        }
    }
    Ok(DiagonalEstimate {
        mean: stats.iter().map(|s| s.mean()).collect(),
        stderr: stats.iter().map(|s| s.stderr()).collect(),
        n: n as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Diagonal;
    use crate::rng::stream;

    #[test]
    fn rademacher_identity_is_exact() {
        let id = Diagonal::new(vec![1.0; 5]).unwrap();
        let spec = ProbeSpec::new(ProbeDistribution::Rademacher, 5).unwrap();
        let est = sh_trace(&id, spec, 100, &mut stream(1, 0, 0)).unwrap();
        assert_eq!(est.mean, 5.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn diagonal_trace() {
        let d = Diagonal::new(vec![1.0, 2.0, 3.0]).unwrap();
        let spec = ProbeSpec::new(ProbeDistribution::Gaussian, 3).unwrap();
        let est = sh_trace(&d, spec, 100_000, &mut stream(2, 0, 0)).unwrap();
        assert!(est.z_score(6.0).abs() < 5.0);
        assert!(sh_trace(&d, spec, 1, &mut stream(2, 0, 0)).is_err());
    }

    #[test]
    fn qf_variance_values() {
        assert_eq!(qf_variance_dense(&DMatrix::identity(3, 3)).unwrap(), 6.0);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        assert_eq!(qf_variance_dense(&d).unwrap(), 4.0);
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(qf_variance_dense(&asym), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn optimal_c_identities() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, -1.0]);
        assert!((optimal_c_dense(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let i = DMatrix::identity(2, 2);
        assert!((optimal_c_dense(&a, &i).unwrap() - 0.5).abs() < 1e-15);
        assert!(optimal_c_dense(&a, &DMatrix::zeros(2, 2)).is_err());
        assert_eq!(variance_reduction(&a, &i, 0.0), 0.0);
        let full = variance_reduction(&a, &a, 1.0);
        assert!((full - qf_variance_dense(&a).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn perfect_control_has_no_variance() {
        let d = Diagonal::new(vec![0.5, -2.0, 1.5]).unwrap();
        let cv = ControlVariate::diagonal(vec![0.5, -2.0, 1.5], 1.0);
        let spec = ProbeSpec::new(ProbeDistribution::Gaussian, 3).unwrap();
        let est = cv_trace(&d, &cv, spec, 50, &mut stream(4, 0, 0)).unwrap();
        assert!((est.mean - 0.0).abs() < 1e-13);
        assert!(est.stderr < 1e-13);
    }

    #[test]
    fn diagonal_estimator() {
        let d = Diagonal::new(vec![2.0, -3.0]).unwrap();
        let spec = ProbeSpec::new(ProbeDistribution::Gaussian, 2).unwrap();
        let est = diag_estimate(&d, spec, 20_000, &mut stream(5, 0, 0)).unwrap();
        for (i, &t) in [2.0, -3.0].iter().enumerate() {
            assert!(((est.mean[i] - t) / est.stderr[i]).abs() < 5.0);
        }
    }
}
