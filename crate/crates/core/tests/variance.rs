mod common;

use chebdos_core::chebyshev::{alpha_from_noise, bound_second_moment, ChebRecursion, VarianceBoundParams};
use chebdos_core::linalg::dot;
use chebdos_core::operator::NoiseKind;
use chebdos_core::pipeline::bootstrap_mean_ci;
use chebdos_core::rng::stream;
use chebdos_core::trace::{
    cv_trace, optimal_c_dense, probe, qf_variance_dense, variance_reduction, ControlVariate, ProbeDistribution,
    ProbeSpec,
};
use common::{noisy_rescaled, random_symmetric, variance};
use nalgebra::DMatrix;

fn quad_forms(a: &DMatrix<f64>, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = a.nrows();
    let spec = ProbeSpec::new(ProbeDistribution::Gaussian, d).unwrap();
    let mut rng = stream(seed, 0, 0);
    let mut xs = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for _ in 0..n {
        let x = probe(spec, &mut rng);
        let ax = a * nalgebra::DVector::from_column_slice(&x);
        q.push(dot(&x, ax.as_slice()));
        xs.push(x);
    }
    (xs, q)
}

#[test]
fn gaussian_quadratic_form_variance_law() {
    let a = random_symmetric(8, 31).to_nalgebra();
    let (_, q) = quad_forms(&a, 1_000_000, 32);
    let expect = qf_variance_dense(&a).unwrap();
    assert!((expect - 2.0 * a.norm_squared()).abs() < 1e-9 * expect);
    let got = variance(&q);
    assert!((got / expect - 1.0).abs() < 0.03, "{got} vs {expect}");
}

#[test]
fn diagonal_control_variate_reduction() {
    let a = random_symmetric(8, 33).to_nalgebra();
    let b_diag: Vec<f64> = (0..8).map(|i| a[(i, i)]).collect();
    let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(b_diag.clone()));
    let c_star = optimal_c_dense(&a, &b).unwrap();
    let (xs, q) = quad_forms(&a, 1_000_000, 34);
    let base = variance(&q);
    let with = |c: f64| {
        let cv = ControlVariate::diagonal(b_diag.clone(), c);
        let v: Vec<f64> = xs.iter().zip(&q).map(|(x, q)| q - cv.correction(x)).collect();
        variance(&v)
    };
    let measured = base - with(c_star);
    let theory = variance_reduction(&a, &b, c_star);
    let tr_ab: f64 = (0..8).map(|i| a[(i, i)] * b_diag[i]).sum();
    let tr_bb: f64 = b_diag.iter().map(|v| v * v).sum();
    assert!((theory - 2.0 * tr_ab * tr_ab / tr_bb).abs() < 1e-9 * theory);
    assert!((measured / theory - 1.0).abs() < 0.05, "{measured} vs {theory}");
    // c = 1 still helps, and c* beats its neighbours
    assert!(with(1.0) < base);
    assert!(with(c_star) <= with(c_star + 0.2));
    assert!(with(c_star) <= with(c_star - 0.2));
}

#[test]
fn identity_control_variate_is_scale_free() {
    let a = random_symmetric(8, 35).to_nalgebra();
    let (xs, q) = quad_forms(&a, 400_000, 36);
    let base = variance(&q);
    let mut reductions = Vec::new();
    for alpha in [1.0, 10.0] {
        let b = DMatrix::<f64>::identity(8, 8) * alpha;
        let c = optimal_c_dense(&a, &b).unwrap();
        let cv = ControlVariate::scaled_identity(alpha, 8, c);
        let v: Vec<f64> = xs.iter().zip(&q).map(|(x, q)| q - cv.correction(x)).collect();
        reductions.push(base - variance(&v));
    }
    assert!((reductions[0] - reductions[1]).abs() < 1e-6 * reductions[0].abs().max(1.0), "{reductions:?}");
}

#[test]
fn control_variate_trace_stays_unbiased() {
    let m = random_symmetric(8, 37);
    let a = m.to_nalgebra();
    let cv = ControlVariate::scaled_identity(1.0, 8, 0.7);
    let est = cv_trace(&m, &cv, ProbeSpec::new(ProbeDistribution::Gaussian, 8).unwrap(), 100_000, &mut stream(38, 0, 0))
        .unwrap();
    assert!((est.mean - a.trace()).abs() < 5.0 * est.stderr);
}

#[test]
fn recursion_second_moment_respects_bound() {
    let d = 16;
    let (op, _) = noisy_rescaled(d, 39, NoiseKind::AdditiveNonzero, 0.02);
    let alpha = alpha_from_noise(&op, 200, &mut stream(40, 0, 0)).unwrap();
    let params = VarianceBoundParams::new(alpha.mean, d).unwrap();
    let spec = ProbeSpec::new(ProbeDistribution::Gaussian, d).unwrap();
    let n = 2000;
    let mut norms = (0..21).map(|_| Vec::with_capacity(n)).collect::<Vec<_>>();
    let mut rng = stream(41, 0, 0);
    for _ in 0..n {
        let x = probe(spec, &mut rng);
        norms[0].push(dot(&x, &x));
        let mut rec = ChebRecursion::new(&op, &x).unwrap();
        for row in norms.iter_mut().skip(1) {
            let t = rec.advance(&mut rng);
            row.push(dot(t, t));
        }
    }
    for (k, row) in norms.iter().enumerate() {
        let (_, hi) = bootstrap_mean_ci(row, 1000, 0.98, &mut stream(42, k as u64, 0)).unwrap();
        // E‖x‖² = D scales the Frobenius bound; unscaled it is tight at k = 0
        let bound = bound_second_moment(params, k);
        assert!(hi <= bound * d as f64, "k={k}: upper {hi} above {}", bound * d as f64);
        if k > 0 {
            assert!(hi <= bound, "k={k}: upper {hi} above {bound}");
        }
    }
}
