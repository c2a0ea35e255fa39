//! Matrix-free symmetric operators.
//!
//! An operator is only ever touched through `apply_into`. Stochastic
//! operators return an independent unbiased draw `Â x` on every call; the
//! mean of those draws is the symmetric matrix whose spectrum is estimated.
//!
//! [`LinearOperator::apply_shared`] pushes several vectors through one and
//! the same draw; its default clones the stream per column, which is right
//! whenever a draw consumes randomness entry by entry independently of `x`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm2};
use crate::rng::{normal, Stream};

/// Affine relation `transformed = scale * original + shift` between the
/// eigenvalue axis of an operator and the axis of the matrix it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub scale: f64,
    pub shift: f64,
}

impl Axis {
    pub const IDENTITY: Axis = Axis { scale: 1.0, shift: 0.0 };

    pub fn forward(&self, original: f64) -> f64 {
        self.scale * original + self.shift
    }

    pub fn inverse(&self, transformed: f64) -> f64 {
        (transformed - self.shift) / self.scale
    }

    /// `then` applied after `self`.
    pub fn compose(&self, then: Axis) -> Axis {
        Axis { scale: then.scale * self.scale, shift: then.scale * self.shift + then.shift }
    }
}

pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// Whether successive calls return independent draws rather than `Ax`.
    fn is_stochastic(&self) -> bool {
        false
    }

    /// Writes one draw of `Âx` into `out`. Both slices have length `dim()`.
    fn apply_into(&self, x: &[f64], out: &mut [f64], rng: &mut Stream);

    /// Writes `Â xs[c]` into `outs[c]` for a single draw `Â` shared by all columns.
    fn apply_shared(&self, xs: &[Vec<f64>], outs: &mut [Vec<f64>], rng: &mut Stream) {
        let mut last = rng.clone();
        for (x, out) in xs.iter().zip(outs.iter_mut()) {
            let mut draw = rng.clone();
            self.apply_into(x, out, &mut draw);
            last = draw;
        }
        *rng = last;
    }

    /// A known upper bound on the spectral norm of the mean operator.
    fn spectral_bound(&self) -> Option<f64> {
        None
    }

    fn axis(&self) -> Axis {
        Axis::IDENTITY
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn is_stochastic(&self) -> bool {
        (**self).is_stochastic()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64], rng: &mut Stream) {
        (**self).apply_into(x, out, rng)
    }
    fn apply_shared(&self, xs: &[Vec<f64>], outs: &mut [Vec<f64>], rng: &mut Stream) {
        (**self).apply_shared(xs, outs, rng)
    }
    fn spectral_bound(&self) -> Option<f64> {
        (**self).spectral_bound()
    }
    fn axis(&self) -> Axis {
        (**self).axis()
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn is_stochastic(&self) -> bool {
        (**self).is_stochastic()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64], rng: &mut Stream) {
        (**self).apply_into(x, out, rng)
    }
    fn apply_shared(&self, xs: &[Vec<f64>], outs: &mut [Vec<f64>], rng: &mut Stream) {
        (**self).apply_shared(xs, outs, rng)
    }
    fn spectral_bound(&self) -> Option<f64> {
        (**self).spectral_bound()
    }
    fn axis(&self) -> Axis {
        (**self).axis()
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// One draw of `Âx` (or `Ax` for deterministic operators).
pub fn apply<O: LinearOperator + ?Sized>(op: &O, x: &[f64], rng: &mut Stream) -> Result<Vec<f64>> {
    check_dim(op.dim(), x.len())?;
    let mut out = vec![0.0; x.len()];
    op.apply_into(x, &mut out, rng);
    Ok(out)
}

/// Applies a single draw `Â` to every column in `xs`.
pub fn apply_columns<O: LinearOperator + ?Sized>(
    op: &O,
    xs: &[Vec<f64>],
    rng: &mut Stream,
) -> Result<Vec<Vec<f64>>> {
    for x in xs {
        check_dim(op.dim(), x.len())?;
    }
    let mut outs = vec![vec![0.0; op.dim()]; xs.len()];
    op.apply_shared(xs, &mut outs, rng);
    Ok(outs)
}

/// Row-wise access to the structurally nonzero entries of an explicit matrix.
pub trait RowAccess: Send + Sync {
    fn dim(&self) -> usize;

    fn for_each_in_row<F: FnMut(usize, f64)>(&self, row: usize, f: F);

    /// `Σ_j a_ij x_j`.
    fn row_dot(&self, row: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each_in_row(row, |j, a| acc += a * x[j]);
        acc
    }

    /// `(Σ_j a_ij x_j, Σ_j x_j², Σ_j (a_ij x_j)²)` over the stored entries of a row.
    fn row_sums(&self, row: usize, x: &[f64]) -> (f64, f64, f64) {
        let (mut acc, mut xx, mut ax2) = (0.0, 0.0, 0.0);
        self.for_each_in_row(row, |j, a| {
            let t = a * x[j];
            acc += t;
            xx += x[j] * x[j];
            ax2 += t * t;
        });
        (acc, xx, ax2)
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm.
    fn gershgorin(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let mut s = 0.0;
                self.for_each_in_row(i, |_, a| s += a.abs());
                s
            })
            .fold(0.0, f64::max)
    }

    fn nnz(&self) -> usize {
        (0..self.dim())
            .map(|i| {
                let mut c = 0;
                self.for_each_in_row(i, |_, _| c += 1);
                c
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagonal {
    values: Vec<f64>,
}

impl Diagonal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("dim", "must be positive"));
        }
        Ok(Diagonal { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl RowAccess for Diagonal {
    fn dim(&self) -> usize {
        self.values.len()
    }
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, row: usize, mut f: F) {
        if self.values[row] != 0.0 {
            f(row, self.values[row]);
        }
    }
}

impl LinearOperator for Diagonal {
    fn dim(&self) -> usize {
        self.values.len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64], _rng: &mut Stream) {
        for ((o, &d), &xi) in out.iter_mut().zip(&self.values).zip(x) {
            *o = d * xi;
        }
    }
    fn spectral_bound(&self) -> Option<f64> {
        Some(self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
    }
}

/// Dense symmetric matrix, stored row-major in full.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymmetric {
    /// Rejects matrices whose asymmetry exceeds `1e-12` relative to the largest entry.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        check_dim(n * n, data.len())?;
        let scale = data.iter().fold(0.0, |m: f64, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((data[i * n + j] - data[j * n + i]).abs());
            }
        }
        if worst > 1e-12 * scale {
            return Err(Error::Asymmetric(worst));
        }
        Ok(DenseSymmetric { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f(i, j);
            }
        }
        Self::from_row_major(n, data)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

impl RowAccess for DenseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, row: usize, mut f: F) {
        for (j, &a) in self.row(row).iter().enumerate() {
            if a != 0.0 {
                f(j, a);
            }
        }
    }

    fn row_dot(&self, row: usize, x: &[f64]) -> f64 {
        dot(self.row(row), x)
    }

    fn row_sums(&self, row: usize, x: &[f64]) -> (f64, f64, f64) {
        let r = self.row(row);
        let (mut acc, mut xx, mut ax2) = ([0.0f64; 4], [0.0f64; 4], [0.0f64; 4]);
        let mut rc = r.chunks_exact(4);
        let mut xc = x.chunks_exact(4);
        for (a, b) in (&mut rc).zip(&mut xc) {
            for l in 0..4 {
                let t = a[l] * b[l];
                acc[l] += t;
                // zero entries are not stored, so they carry no noise
                xx[l] += if a[l] != 0.0 { b[l] * b[l] } else { 0.0 };
                ax2[l] += t * t;
            }
        }
        let (mut a1, mut x1, mut t1) = (acc.iter().sum::<f64>(), xx.iter().sum::<f64>(), ax2.iter().sum::<f64>());
        for (&a, &b) in rc.remainder().iter().zip(xc.remainder()) {
            let t = a * b;
            a1 += t;
            if a != 0.0 {
                x1 += b * b;
            }
            t1 += t * t;
        }
        (a1, x1, t1)
    }
}

impl LinearOperator for DenseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64], _rng: &mut Stream) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }
    fn spectral_bound(&self) -> Option<f64> {
        Some(self.gershgorin())
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(n: usize, indptr: Vec<usize>, indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        check_dim(n + 1, indptr.len())?;
        check_dim(indices.len(), values.len())?;
        if indptr[n] != indices.len() || indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("indptr", "not a valid row pointer array"));
        }
        if indices.iter().any(|&j| j as usize >= n) {
            return Err(invalid("indices", "column index out of range"));
        }
        Ok(CsrMatrix { n, indptr, indices, values })
    }

    /// Builds from a row-entry visitor, e.g. to precompute an implicit matrix.
    pub fn from_rows<M: RowAccess>(m: &M) -> Self {
        let n = m.dim();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..n {
            m.for_each_in_row(i, |j, a| {
                indices.push(j as u32);
                values.push(a);
            });
            indptr.push(indices.len());
        }
        CsrMatrix { n, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

impl RowAccess for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }
    #[inline]
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, row: usize, mut f: F) {
        let (s, e) = (self.indptr[row], self.indptr[row + 1]);
        for (&j, &a) in self.indices[s..e].iter().zip(&self.values[s..e]) {
            f(j as usize, a);
        }
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64], _rng: &mut Stream) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            self.for_each_in_row(i, |j, a| acc += a * x[j]);
            *o = acc;
        }
    }
    fn spectral_bound(&self) -> Option<f64> {
        Some(self.gershgorin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    /// Independent Gaussian added to every structurally nonzero entry.
    AdditiveNonzero,
    /// Every product term `a_ij x_j` scaled by an independent `(1 + η)`.
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub variance: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { kind: NoiseKind::None, variance: 0.0 };

    pub fn new(kind: NoiseKind, variance: f64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(invalid("variance", "must be finite and nonnegative"));
        }
        Ok(NoiseModel { kind, variance })
    }

    /// Variance `multiple / d²` with `d` the matrix dimension.
    pub fn per_dimension(kind: NoiseKind, multiple: f64, dim: usize) -> Result<Self> {
        let d = dim as f64;
        Self::new(kind, multiple / (d * d))
    }

    pub fn is_active(&self) -> bool {
        self.kind != NoiseKind::None && self.variance > 0.0
    }
}

/// An explicit matrix whose matvecs are perturbed by fresh noise on every call.
#[derive(Debug, Clone)]
pub struct Noisy<M> {
    matrix: M,
    noise: NoiseModel,
}

impl<M: RowAccess> Noisy<M> {
    pub fn new(matrix: M, noise: NoiseModel) -> Self {
        Noisy { matrix, noise }
    }

    pub fn matrix(&self) -> &M {
        &self.matrix
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }
}

impl<M: RowAccess> Noisy<M> {
    /// One draw with an explicit perturbation of every stored entry.
    fn apply_entrywise(&self, x: &[f64], out: &mut [f64], rng: &mut Stream) {
        let sd = libm::sqrt(self.noise.variance);
        let kind = if self.noise.is_active() { self.noise.kind } else { NoiseKind::None };
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            match kind {
                NoiseKind::None => self.matrix.for_each_in_row(i, |j, a| acc += a * x[j]),
                NoiseKind::AdditiveNonzero => self
                    .matrix
                    .for_each_in_row(i, |j, a| acc += (a + sd * normal(rng)) * x[j]),
                NoiseKind::Multiplicative => self
                    .matrix
                    .for_each_in_row(i, |j, a| acc += a * (1.0 + sd * normal(rng)) * x[j]),
            }
            *o = acc;
        }
    }
}

impl<M: RowAccess> LinearOperator for Noisy<M> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn is_stochastic(&self) -> bool {
        self.noise.is_active()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64], rng: &mut Stream) {
        let sd = libm::sqrt(self.noise.variance);
        let kind = if self.noise.is_active() { self.noise.kind } else { NoiseKind::None };
        // Entry perturbations are independent Gaussians, so a row's total
        // perturbation is one Gaussian with the summed variance.
        for (i, o) in out.iter_mut().enumerate() {
            let acc = match kind {
                NoiseKind::None => self.matrix.row_dot(i, x),
                NoiseKind::AdditiveNonzero => {
                    let (acc, xx, _) = self.matrix.row_sums(i, x);
                    acc + sd * libm::sqrt(xx) * normal(rng)
                }
                NoiseKind::Multiplicative => {
                    let (acc, _, ax2) = self.matrix.row_sums(i, x);
                    acc + sd * libm::sqrt(ax2) * normal(rng)
                }
            };
            *o = acc;
        }
    }

    fn apply_shared(&self, xs: &[Vec<f64>], outs: &mut [Vec<f64>], rng: &mut Stream) {
        let mut last = rng.clone();
        for (x, out) in xs.iter().zip(outs.iter_mut()) {
            let mut draw = rng.clone();
            self.apply_entrywise(x, out, &mut draw);
            last = draw;
        }
        *rng = last;
    }

    fn spectral_bound(&self) -> Option<f64> {
        Some(self.matrix.gershgorin())
    }
}

/// `x ↦ apply(inner, x) / (norm_bound + margin)`.
#[derive(Debug, Clone)]
pub struct Rescaled<O> {
    inner: O,
    norm_bound: f64,
    margin: f64,
}

impl<O: LinearOperator> Rescaled<O> {
    pub fn divisor(&self) -> f64 {
        self.norm_bound + self.margin
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

/// Divides `op` by `norm_bound + margin` so that its spectrum lies in (−1, 1)
/// whenever `norm_bound` bounds the spectral norm.
pub fn rescale<O: LinearOperator>(op: O, norm_bound: f64, margin: f64) -> Result<Rescaled<O>> {
    if !(norm_bound > 0.0) || !norm_bound.is_finite() {
        return Err(invalid("norm_bound", "must be positive and finite"));
    }
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(invalid("margin", "must be positive and finite"));
    }
    Ok(Rescaled { inner: op, norm_bound, margin })
}

impl<O: LinearOperator> LinearOperator for Rescaled<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn is_stochastic(&self) -> bool {
        self.inner.is_stochastic()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64], rng: &mut Stream) {
        self.inner.apply_into(x, out, rng);
        let inv = 1.0 / self.divisor();
        out.iter_mut().for_each(|o| *o *= inv);
    }
    fn apply_shared(&self, xs: &[Vec<f64>], outs: &mut [Vec<f64>], rng: &mut Stream) {
        self.inner.apply_shared(xs, outs, rng);
        let inv = 1.0 / self.divisor();
        outs.iter_mut().flatten().for_each(|o| *o *= inv);
    }
    fn spectral_bound(&self) -> Option<f64> {
        Some(self.norm_bound / self.divisor())
    }
    fn axis(&self) -> Axis {
        self.inner.axis().compose(Axis { scale: 1.0 / self.divisor(), shift: 0.0 })
    }
}

/// `x ↦ α·apply(inner, x) + β·x`.
#[derive(Debug, Clone)]
pub struct Affine<O> {
    inner: O,
    alpha: f64,
    beta: f64,
    bound: Option<f64>,
}

pub fn affine<O: LinearOperator>(op: O, alpha: f64, beta: f64) -> Affine<O> {
    let bound = op.spectral_bound().map(|b| alpha.abs() * b + beta.abs());
    Affine { inner: op, alpha, beta, bound }
}

impl<O: LinearOperator> Affine<O> {
    /// Replaces the propagated norm bound with one known analytically.
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: LinearOperator> LinearOperator for Affine<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn is_stochastic(&self) -> bool {
        self.inner.is_stochastic()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64], rng: &mut Stream) {
        self.inner.apply_into(x, out, rng);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = self.alpha * *o + self.beta * xi;
        }
    }
    fn apply_shared(&self, xs: &[Vec<f64>], outs: &mut [Vec<f64>], rng: &mut Stream) {
        self.inner.apply_shared(xs, outs, rng);
        for (x, out) in xs.iter().zip(outs.iter_mut()) {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = self.alpha * *o + self.beta * xi;
            }
        }
    }
    fn spectral_bound(&self) -> Option<f64> {
        self.bound
    }
    fn axis(&self) -> Axis {
        self.inner.axis().compose(Axis { scale: self.alpha, shift: self.beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
}

/// Matvec draws averaged per power iteration on stochastic operators.
pub const STOCHASTIC_DRAWS_PER_ITER: usize = 8;

/// Power iteration on the mean operator.
///
/// Returns `‖A v‖` at the final unit iterate `v`, i.e. the square root of the
/// Rayleigh quotient of `AᵀA`; unlike the Rayleigh quotient of `A` this
/// converges to the spectral norm when `±‖A‖` are both eigenvalues.
pub fn estimate_operator_norm<O: LinearOperator + ?Sized>(
    op: &O,
    iters: usize,
    rng: &mut Stream,
) -> Result<NormEstimate> {
    if iters == 0 {
        return Err(invalid("iters", "must be at least 1"));
    }
    let n = op.dim();
    let draws = if op.is_stochastic() { STOCHASTIC_DRAWS_PER_ITER } else { 1 };
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let mut value = 0.0;

    let restart = |v: &mut Vec<f64>, rng: &mut Stream| loop {
        v.iter_mut().for_each(|e| *e = normal(rng));
        let nv = norm2(v);
        if nv > 0.0 {
            v.iter_mut().for_each(|e| *e /= nv);
            break;
        }
    };
    restart(&mut v, rng);

    let mut it = 0;
    while it < iters {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..draws {
            op.apply_into(&v, &mut w, rng);
            acc.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
        }
        acc.iter_mut().for_each(|a| *a /= draws as f64);
        let na = norm2(&acc);
        if na == 0.0 {
            // start vector fell into the null space
            restart(&mut v, rng);
            value = 0.0;
            it += 1;
            continue;
        }
        value = na;
        v.iter_mut().zip(&acc).for_each(|(e, a)| *e = a / na);
        it += 1;
    }
    Ok(NormEstimate { value, iterations: it })
}
