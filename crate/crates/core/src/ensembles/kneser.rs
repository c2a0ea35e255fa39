//! Kneser graphs `K(n, k)`: vertices are the `k`-subsets of an `n`-set and two
//! vertices are adjacent when the subsets are disjoint.

use alloc::vec::Vec;

use super::analytic::AnalyticSpectrum;
use super::combinatorics::{binomial, rank, unrank, BinomialTable};
use crate::error::{invalid, Error, Result};
use crate::operator::{CsrMatrix, LinearOperator, NoiseModel, Noisy, RowAccess};
use crate::rng::Stream;

/// Graphs with at most this many vertices are stored in compressed form.
pub const PRECOMPUTE_LIMIT: u64 = 100_000;

/// Working vectors assumed per vertex when estimating memory use.
const WORK_VECTORS: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KneserSpec {
    n: usize,
    k: usize,
}

impl KneserSpec {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 || 2 * k > n {
            return Err(invalid("kneser", alloc::format!("need 1 ≤ k and 2k ≤ n, got n={n} k={k}")));
        }
        if n > 62 {
            return Err(invalid("kneser", "n must be at most 62"));
        }
        if binomial(n as u64, k as u64).is_none_or(|v| v > u32::MAX as u64) {
            return Err(invalid("kneser", "vertex count exceeds the supported range"));
        }
        Ok(KneserSpec { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vertex_count(&self) -> u64 {
        binomial(self.n as u64, self.k as u64).unwrap_or(0)
    }

    pub fn degree(&self) -> u64 {
        binomial((self.n - self.k) as u64, self.k as u64).unwrap_or(0)
    }

    /// Nonzero entries of the adjacency matrix (ordered vertex pairs).
    pub fn nonzeros(&self) -> u64 {
        self.vertex_count() * self.degree()
    }

    /// Undirected edge count.
    pub fn edges(&self) -> u64 {
        self.nonzeros() / 2
    }

    /// Estimated bytes for the operator plus recursion work vectors.
    pub fn memory_estimate(&self, precompute: bool) -> u64 {
        let v = self.vertex_count();
        let work = WORK_VECTORS * 8 * v;
        if precompute {
            work + self.nonzeros() * (4 + 8) + (v + 1) * 8
        } else {
            work + ((self.n + 1) * (self.k + 1) * 8) as u64
        }
    }
}

/// Adjacency matrix of `K(n, k)` with rows generated on demand by
/// enumerating `k`-subsets of each vertex's complement.
#[derive(Debug, Clone)]
pub struct KneserGraph {
    spec: KneserSpec,
    table: BinomialTable,
    dim: usize,
}

impl KneserGraph {
    pub fn new(spec: KneserSpec) -> Self {
        KneserGraph { spec, table: BinomialTable::new(spec.n, spec.k), dim: spec.vertex_count() as usize }
    }

    pub fn spec(&self) -> KneserSpec {
        self.spec
    }

    /// Bitmask of the subset with colex rank `v`.
    pub fn vertex(&self, v: usize) -> u64 {
        unrank(v as u64, self.spec.n, self.spec.k, &self.table)
    }

    pub fn neighbors(&self, v: usize, mut f: impl FnMut(usize)) {
        let (n, k) = (self.spec.n, self.spec.k);
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let comp = !self.vertex(v) & full;
        let mut pos = [0u8; 64];
        let mut m = comp;
        let mut len = 0;
        while m != 0 {
            pos[len] = m.trailing_zeros() as u8;
            m &= m - 1;
            len += 1;
        }
        // Gosper's hack over k-of-(n−k) selections of complement positions
        let limit = 1u64 << len;
        let mut sel = (1u64 << k) - 1;
        while sel < limit {
            let mut mask = 0u64;
            let mut s = sel;
            while s != 0 {
                mask |= 1u64 << pos[s.trailing_zeros() as usize];
                s &= s - 1;
            }
            f(rank(mask, &self.table) as usize);
            let c = sel & sel.wrapping_neg();
            let r = sel + c;
            sel = (((r ^ sel) >> 2) / c) | r;
        }
    }
}

impl RowAccess for KneserGraph {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, row: usize, mut f: F) {
        self.neighbors(row, |j| f(j, 1.0));
    }

    fn gershgorin(&self) -> f64 {
        self.spec.degree() as f64
    }

    fn nnz(&self) -> usize {
        self.spec.nonzeros() as usize
    }
}

/// Kneser adjacency operator with optional per-entry noise.
#[derive(Debug, Clone)]
pub enum KneserOperator {
    Precomputed(Noisy<CsrMatrix>),
    OnTheFly(Noisy<KneserGraph>),
}

/// Builds the adjacency operator, precomputing the sparse matrix for graphs
/// with at most [`PRECOMPUTE_LIMIT`] vertices.
pub fn kneser_operator(spec: KneserSpec, noise: NoiseModel, budget_bytes: u64) -> Result<KneserOperator> {
    let precompute = spec.vertex_count() <= PRECOMPUTE_LIMIT;
    let required = spec.memory_estimate(precompute);
    if required > budget_bytes {
        return Err(Error::BudgetExceeded { required_bytes: required, budget_bytes });
    }
    let graph = KneserGraph::new(spec);
    Ok(if precompute {
        KneserOperator::Precomputed(Noisy::new(CsrMatrix::from_rows(&graph), noise))
    } else {
        KneserOperator::OnTheFly(Noisy::new(graph, noise))
    })
}

impl KneserOperator {
    pub fn is_precomputed(&self) -> bool {
        matches!(self, KneserOperator::Precomputed(_))
    }
}

impl LinearOperator for KneserOperator {
    fn dim(&self) -> usize {
        match self {
            KneserOperator::Precomputed(m) => m.dim(),
            KneserOperator::OnTheFly(m) => m.dim(),
        }
    }

    fn is_stochastic(&self) -> bool {
        match self {
            KneserOperator::Precomputed(m) => m.is_stochastic(),
            KneserOperator::OnTheFly(m) => m.is_stochastic(),
        }
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64], rng: &mut Stream) {
        match self {
            KneserOperator::Precomputed(m) => m.apply_into(x, out, rng),
            KneserOperator::OnTheFly(m) => m.apply_into(x, out, rng),
        }
    }

    fn apply_shared(&self, xs: &[Vec<f64>], outs: &mut [Vec<f64>], rng: &mut Stream) {
        match self {
            KneserOperator::Precomputed(m) => m.apply_shared(xs, outs, rng),
            KneserOperator::OnTheFly(m) => m.apply_shared(xs, outs, rng),
        }
    }

    fn spectral_bound(&self) -> Option<f64> {
        match self {
            KneserOperator::Precomputed(m) => m.spectral_bound(),
            KneserOperator::OnTheFly(m) => m.spectral_bound(),
        }
    }
}

/// `λ_i = (−1)^i C(n−k−i, k−i)` with multiplicity `C(n, i) − C(n, i−1)`.
pub fn kneser_spectrum(spec: KneserSpec) -> AnalyticSpectrum {
    let (n, k) = (spec.n as u64, spec.k as u64);
    let pairs: Vec<(f64, u64)> = (0..=k)
        .map(|i| {
            let mag = binomial(n - k - i, k - i).unwrap_or(0) as f64;
            let value = if i % 2 == 0 { mag } else { -mag };
            let prev = if i == 0 { 0 } else { binomial(n, i - 1).unwrap_or(0) };
            (value, binomial(n, i).unwrap_or(0) - prev)
        })
        .collect();
    AnalyticSpectrum::discrete(pairs)
}
