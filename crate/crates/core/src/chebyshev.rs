//! Randomized Chebyshev recursions.
//!
//! `T̂_k x` is built by the vector recurrence
//! `T̂_j x = 2 Â_j (T̂_{j-1} x) - T̂_{j-2} x` with a fresh, independent operator
//! draw `Â_j` at every level. Independence across levels makes `T̂_k` an
//! unbiased estimate of `T_k(A)`, even though its second moment grows
//! geometrically with `k`.

use alloc::vec;
use alloc::vec::Vec;
use core::mem;

use crate::error::{invalid, Error, Result};
use crate::linalg::{materialize_draw, norm2, spectral_norm};
use crate::operator::{check_dim, LinearOperator};
use crate::rng::Stream;
use crate::stats::{MeanEstimate, RunningStats};

/// `T_k(a)` by the two-term recurrence.
pub fn cheb_scalar(k: usize, a: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => a,
        _ => {
            let (mut t0, mut t1) = (1.0, a);
            for _ in 2..=k {
                let t2 = 2.0 * a * t1 - t0;
                t0 = t1;
                t1 = t2;
            }
            t1
        }
    }
}

/// Iterates with a norm above `OVERFLOW_FACTOR * sqrt(D)` are flagged as outliers.
pub const OVERFLOW_FACTOR: f64 = 1e12;

/// Vector state of the randomized recursion: `T̂_{k-1} x`, `T̂_k x` and `k`.
#[derive(Debug, Clone)]
pub struct ChebRecursion<'a, O: ?Sized> {
    op: &'a O,
    prev: Vec<f64>,
    current: Vec<f64>,
    scratch: Vec<f64>,
    level: usize,
    threshold: f64,
    overflow_level: Option<usize>,
}

impl<'a, O: LinearOperator + ?Sized> ChebRecursion<'a, O> {
    /// Starts at level 0 with `T̂_0 x = x`.
    pub fn new(op: &'a O, x: &[f64]) -> Result<Self> {
        check_dim(op.dim(), x.len())?;
        let n = x.len();
        Ok(ChebRecursion {
            op,
            prev: vec![0.0; n],
            current: x.to_vec(),
            scratch: vec![0.0; n],
            level: 0,
            threshold: OVERFLOW_FACTOR * libm::sqrt(n as f64),
            overflow_level: None,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// `T̂_k x` at the current level `k`.
    pub fn current(&self) -> &[f64] {
        &self.current
    }

    /// `T̂_{k-1} x`; meaningless at level 0.
    pub fn previous(&self) -> &[f64] {
        &self.prev
    }

    /// First level at which the iterate norm exceeded the overflow threshold.
    pub fn overflow_level(&self) -> Option<usize> {
        self.overflow_level
    }

    /// Advances one level using one fresh draw from `rng`.
    pub fn advance(&mut self, rng: &mut Stream) -> &[f64] {
        self.op.apply_into(&self.current, &mut self.scratch, rng);
        if self.level > 0 {
            for (s, p) in self.scratch.iter_mut().zip(&self.prev) {
                *s = 2.0 * *s - p;
            }
        }
        mem::swap(&mut self.prev, &mut self.current);
        mem::swap(&mut self.current, &mut self.scratch);
        self.level += 1;
        if self.overflow_level.is_none() {
            let nrm = norm2(&self.current);
            if !(nrm <= self.threshold) {
                self.overflow_level = Some(self.level);
            }
        }
        &self.current
    }

    pub fn advance_to(&mut self, k: usize, rng: &mut Stream) -> &[f64] {
        while self.level < k {
            self.advance(rng);
        }
        &self.current
    }
}

/// One draw of `T̂_k x`; equals `T_k(A) x` for deterministic operators.
pub fn cheb_vec_apply<O: LinearOperator + ?Sized>(
    op: &O,
    x: &[f64],
    k: usize,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    let mut rec = ChebRecursion::new(op, x)?;
    rec.advance_to(k, rng);
    Ok(rec.current)
}

/// Constant of the second-moment bound: `α ≥ 4E‖Â‖² + 2E‖Â‖ + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBoundParams {
    pub alpha: f64,
    pub dim: usize,
}

impl VarianceBoundParams {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha >= 1.0) {
            return Err(invalid("alpha", "must be at least 1"));
        }
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        Ok(VarianceBoundParams { alpha, dim })
    }
}

/// Upper bound `D α^k` on `E‖T̂_k‖²_F`.
pub fn bound_second_moment(params: VarianceBoundParams, k: usize) -> f64 {
    params.dim as f64 * libm::pow(params.alpha, k as f64)
}

/// Largest dimension accepted by [`alpha_from_noise`].
pub const ALPHA_DENSE_LIMIT: usize = 256;

/// Monte Carlo estimate of `4E‖Â‖² + 2E‖Â‖ + 1` from dense spectral norms of
/// sampled draws. Validation only: draws are materialized column by column.
pub fn alpha_from_noise<O: LinearOperator + ?Sized>(
    op: &O,
    n_samples: usize,
    rng: &mut Stream,
) -> Result<MeanEstimate> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    if op.dim() > ALPHA_DENSE_LIMIT {
        return Err(Error::TooLargeForDense { dim: op.dim(), max: ALPHA_DENSE_LIMIT });
    }
    let mut stats = RunningStats::new();
    for _ in 0..n_samples {
        let draw = materialize_draw(op, ALPHA_DENSE_LIMIT, rng)?;
        let s = spectral_norm(&draw);
        // linear in E‖Â‖² and E‖Â‖, so the per-draw value is itself unbiased
        stats.push(4.0 * s * s + 2.0 * s + 1.0);
    }
    Ok(stats.estimate())
}
