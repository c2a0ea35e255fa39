#![allow(dead_code)]

use chebdos_core::linalg::spectral_norm;
use chebdos_core::operator::{rescale, DenseSymmetric, NoiseKind, NoiseModel, Noisy, Rescaled};
use chebdos_core::rng::{normal, stream};
use nalgebra::DMatrix;

/// Random symmetric matrix with standard normal entries.
pub fn random_symmetric(d: usize, seed: u64) -> DenseSymmetric {
    let mut rng = stream(seed, 0, 0);
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let v = normal(&mut rng);
            m[i * d + j] = v;
            m[j * d + i] = v;
        }
    }
    DenseSymmetric::from_row_major(d, m).unwrap()
}

/// A noisy operator rescaled into (−1, 1) and the dense mean it estimates.
pub fn noisy_rescaled(d: usize, seed: u64, kind: NoiseKind, variance: f64) -> (Rescaled<Noisy<DenseSymmetric>>, DMatrix<f64>) {
    let m = random_symmetric(d, seed);
    let dense = m.to_nalgebra();
    let norm = spectral_norm(&dense);
    let op = rescale(Noisy::new(m, NoiseModel::new(kind, variance).unwrap()), norm, 0.1 * norm).unwrap();
    let mean = dense / op.divisor();
    (op, mean)
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn variance(xs: &[f64]) -> f64 {
    mean_and_stderr(xs).1.powi(2) * xs.len() as f64
}
