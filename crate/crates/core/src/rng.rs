//! Seedable randomness streams.
//!
//! Every independent unit of work (a probe, a query point, a worker) owns its
//! own [`Stream`], derived from a root seed and a pair of identifiers. Results
//! therefore depend only on the seed and the identifiers, never on which
//! thread happened to run the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// The randomness stream consumed by operators and estimators.
pub type Stream = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for work unit `(a, b)` under a root `seed`.
pub fn stream(seed: u64, a: u64, b: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(splitmix(splitmix(a) ^ b.rotate_left(17)));
    rng
}

#[inline]
pub fn normal(rng: &mut Stream) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
pub fn uniform(rng: &mut Stream) -> f64 {
    rng.random::<f64>()
}

#[inline]
pub fn rademacher(rng: &mut Stream) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}
