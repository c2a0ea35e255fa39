//! Binomial coefficients and the colexicographic number system for subsets
//! stored as bitmasks.

use alloc::vec;
use alloc::vec::Vec;

/// `C(n, k)`, or `None` on overflow. `C(n, k) = 0` for `k > n`.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Table of `C(m, j)` for `m ≤ n`, `j ≤ k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinomialTable {
    k: usize,
    values: Vec<u64>,
}

impl BinomialTable {
    /// Caller guarantees `C(n, k)` (hence every entry) fits in `u64`.
    pub fn new(n: usize, k: usize) -> Self {
        let mut values = vec![0u64; (n + 1) * (k + 1)];
        for m in 0..=n {
            values[m * (k + 1)] = 1;
            for j in 1..=k.min(m) {
                let above = values[(m - 1) * (k + 1) + j - 1];
                let left = if j < m { values[(m - 1) * (k + 1) + j] } else { 0 };
                values[m * (k + 1) + j] = above + left;
            }
        }
        BinomialTable { k, values }
    }

    #[inline]
    pub fn get(&self, m: usize, j: usize) -> u64 {
        if j > self.k {
            return 0;
        }
        self.values.get(m * (self.k + 1) + j).copied().unwrap_or(0)
    }
}

/// Colex rank `Σ_i C(c_i, i+1)` of the set with elements `c_0 < c_1 < ...`.
#[inline]
pub fn rank(mask: u64, table: &BinomialTable) -> u64 {
    let mut r = 0;
    let mut m = mask;
    let mut i = 1;
    while m != 0 {
        let c = m.trailing_zeros() as usize;
        r += table.get(c, i);
        m &= m - 1;
        i += 1;
    }
    r
}

/// Inverse of [`rank`] for `k`-subsets of `{0, .., n-1}`.
pub fn unrank(mut r: u64, n: usize, k: usize, table: &BinomialTable) -> u64 {
    let mut mask = 0u64;
    let mut c = n;
    for i in (1..=k).rev() {
        c -= 1;
        while table.get(c, i) > r {
            c -= 1;
        }
        mask |= 1u64 << c;
        r -= table.get(c, i);
    }
    mask
}
