//! Vector kernels and small dense helpers used by validation paths.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::{apply_columns, LinearOperator};
use crate::rng::Stream;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators so the loop vectorizes
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Largest dimension for which operators are materialized densely.
pub const DENSE_LIMIT: usize = 4096;

fn basis(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect()
}

/// Materializes one draw `Â` of `op` by applying it to every basis vector.
pub fn materialize_draw<O: LinearOperator + ?Sized>(
    op: &O,
    max_dim: usize,
    rng: &mut Stream,
) -> Result<DMatrix<f64>> {
    let n = op.dim();
    if n > max_dim {
        return Err(Error::TooLargeForDense { dim: n, max: max_dim });
    }
    let cols = apply_columns(op, &basis(n), rng)?;
    Ok(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
}

/// Dense matrix of a deterministic operator.
pub fn materialize<O: LinearOperator + ?Sized>(op: &O, rng: &mut Stream) -> Result<DMatrix<f64>> {
    materialize_draw(op, DENSE_LIMIT, rng)
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().iter().fold(0.0, |a: f64, &b| a.max(b))
}

/// `T_k(A)` for a symmetric `A`, via the matrix three-term recurrence.
pub fn chebyshev_matrix(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut prev2 = DMatrix::<f64>::identity(n, n);
    if k == 0 {
        return prev2;
    }
    let mut prev1 = a.clone();
    for _ in 2..=k {
        let next = a * &prev1 * 2.0 - &prev2;
        prev2 = prev1;
        prev1 = next;
    }
    prev1
}

pub fn trace(m: &DMatrix<f64>) -> f64 {
    m.diagonal().iter().sum()
}
