mod common;

use chebdos_core::chebyshev::{cheb_scalar, ChebRecursion};
use chebdos_core::ensembles::{kneser_operator, KneserSpec};
use chebdos_core::linalg::{chebyshev_matrix, dot, materialize, symmetric_eigenvalues};
use chebdos_core::operator::{apply, rescale, Diagonal, NoiseKind, NoiseModel, Noisy};
use chebdos_core::pipeline::{estimate_density, uniform_grid, Mode, RunConfig, Sequential};
use chebdos_core::proposal::{build_proposal, optimal_proposal, sample_index, truncation_estimate};
use chebdos_core::rng::stream;
use chebdos_core::trace::{probe, sh_trace, ProbeDistribution, ProbeSpec};
use chebdos_core::vonmises::{kernel_coeffs, kernel_eval, series_eval, CoefficientSeries, VonMisesParams};
use common::{mean_and_stderr, noisy_rescaled, random_symmetric, variance};
use nalgebra::{DMatrix, DVector};

#[test]
fn noisy_petersen_matvec_mean_is_exact() {
    let spec = KneserSpec::new(5, 2).unwrap();
    let noisy = kneser_operator(spec, NoiseModel::new(NoiseKind::AdditiveNonzero, 0.25).unwrap(), 1 << 20).unwrap();
    let clean = kneser_operator(spec, NoiseModel::NONE, 1 << 20).unwrap();
    let x: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
    let exact = apply(&clean, &x, &mut stream(0, 0, 0)).unwrap();
    let mut rng = stream(1, 0, 0);
    let n = 100_000;
    let mut cols = (0..10).map(|_| Vec::with_capacity(n)).collect::<Vec<_>>();
    for _ in 0..n {
        let y = apply(&noisy, &x, &mut rng).unwrap();
        for (c, v) in cols.iter_mut().zip(y) {
            c.push(v);
        }
    }
    for (i, c) in cols.iter().enumerate() {
        let (m, se) = mean_and_stderr(c);
        assert!((m - exact[i]).abs() < 4.0 * se, "entry {i}: {m} vs {}", exact[i]);
    }
}

#[test]
fn noisy_recursion_is_unbiased_at_order_five() {
    let (op, mean) = noisy_rescaled(16, 3, NoiseKind::AdditiveNonzero, 0.05);
    let x: Vec<f64> = (0..16).map(|i| 1.0 - 0.1 * i as f64).collect();
    let target = chebyshev_matrix(&mean, 5) * DVector::from_vec(x.clone());
    let mut rng = stream(2, 0, 0);
    let n = 100_000;
    let mut cols = (0..16).map(|_| Vec::with_capacity(n)).collect::<Vec<_>>();
    for _ in 0..n {
        let mut rec = ChebRecursion::new(&op, &x).unwrap();
        let t = rec.advance_to(5, &mut rng);
        for (c, v) in cols.iter_mut().zip(t) {
            c.push(*v);
        }
    }
    for (i, c) in cols.iter().enumerate() {
        let (m, se) = mean_and_stderr(c);
        assert!((m - target[i]).abs() < 5.0 * se, "entry {i}: {m} vs {}", target[i]);
    }
}

#[test]
fn scalar_importance_sampling_matches_series() {
    let series = kernel_coeffs(VonMisesParams::new(30.0, -0.2).unwrap(), 1e-12).unwrap();
    let p = build_proposal(&series).unwrap();
    let a = 0.3;
    let exact: f64 = series.coeffs().iter().enumerate().map(|(k, g)| g * cheb_scalar(k, a)).sum();
    let mut rng = stream(4, 0, 0);
    let draws: Vec<f64> = (0..200_000)
        .map(|_| {
            let (k, w) = sample_index(&p, &mut rng);
            w * cheb_scalar(k, a)
        })
        .collect();
    let (m, se) = mean_and_stderr(&draws);
    assert!((m - exact).abs() < 5.0 * se, "{m} vs {exact}");
}

#[test]
fn proposal_frequencies_match_masses() {
    let series = kernel_coeffs(VonMisesParams::new(20.0, 0.4).unwrap(), 1e-12).unwrap();
    let p = build_proposal(&series).unwrap();
    let n = 1_000_000;
    let mut counts = vec![0u64; p.k_max() + 1];
    let mut rng = stream(5, 0, 0);
    for _ in 0..n {
        counts[sample_index(&p, &mut rng).0] += 1;
    }
    for (k, (&c, &q)) in counts.iter().zip(p.masses()).enumerate() {
        let sd = (n as f64 * q * (1.0 - q)).sqrt();
        assert!((c as f64 - n as f64 * q).abs() <= 4.0 * sd + 1.0, "k={k}: {c} vs {}", n as f64 * q);
    }
}

fn quadratic_form_oracle(mean: &DMatrix<f64>, series: &CoefficientSeries, x: &[f64]) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(mean.clone());
    let xv = DVector::from_vec(x.to_vec());
    (0..mean.nrows())
        .map(|d| {
            let proj = eig.eigenvectors.column(d).dot(&xv);
            series_eval(series, eig.eigenvalues[d]).unwrap() * proj * proj
        })
        .sum()
}

#[test]
fn importance_sampled_quadratic_form_is_unbiased_on_noisy_operator() {
    let (op, mean) = noisy_rescaled(8, 6, NoiseKind::Multiplicative, 0.02);
    let series = kernel_coeffs(VonMisesParams::new(20.0, 0.1).unwrap(), 1e-12).unwrap();
    let p = build_proposal(&series).unwrap();
    let x = probe(ProbeSpec::new(ProbeDistribution::Gaussian, 8).unwrap(), &mut stream(7, 0, 0));
    let exact = quadratic_form_oracle(&mean, &series, &x);
    let mut rng = stream(8, 0, 0);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| {
            let (k, w) = sample_index(&p, &mut rng);
            let mut rec = ChebRecursion::new(&op, &x).unwrap();
            let t = rec.advance_to(k, &mut rng);
            series.jacobian() * w * dot(&x, t)
        })
        .collect();
    let (m, se) = mean_and_stderr(&draws);
    assert!((m - exact).abs() < 5.0 * se, "{m} vs {exact} (se {se})");
}

#[test]
fn randomized_truncation_is_unbiased() {
    let d = Diagonal::new(vec![-0.6, 0.1, 0.5]).unwrap();
    let series = CoefficientSeries::new(vec![0.4, -0.3, 0.2, 0.1]).unwrap();
    let p = build_proposal(&series).unwrap();
    let x = vec![1.0, -0.5, 2.0];
    let exact: f64 = [-0.6f64, 0.1, 0.5]
        .iter()
        .zip(&x)
        .map(|(l, xi)| xi * xi * (0..4).map(|j| series.coeffs()[j] * cheb_scalar(j, *l)).sum::<f64>())
        .sum();
    let mut rng = stream(9, 0, 0);
    let draws: Vec<f64> = (0..100_000).map(|_| truncation_estimate(&d, &x, &p, &mut rng).unwrap()).collect();
    let (m, se) = mean_and_stderr(&draws);
    assert!((m - exact).abs() < 5.0 * se, "{m} vs {exact}");

    let (op, mean) = noisy_rescaled(8, 10, NoiseKind::AdditiveNonzero, 0.05);
    let series = kernel_coeffs(VonMisesParams::new(10.0, -0.3).unwrap(), 1e-12).unwrap();
    let p = build_proposal(&series).unwrap();
    let y: Vec<f64> = x.iter().chain(&x).chain(&x[..2]).copied().collect();
    let exact = quadratic_form_oracle(&mean, &series, &y);
    let draws: Vec<f64> =
        (0..100_000).map(|_| series.jacobian() * truncation_estimate(&op, &y, &p, &mut rng).unwrap()).collect();
    let (m, se) = mean_and_stderr(&draws);
    assert!((m - exact).abs() < 5.0 * se, "{m} vs {exact}");
}

#[test]
fn optimal_proposal_does_not_increase_variance() {
    // D=16 noisy operator with moments growing in k, truncated at k_max = 8
    let (op, _) = noisy_rescaled(16, 11, NoiseKind::AdditiveNonzero, 0.5);
    let full = kernel_coeffs(VonMisesParams::new(5.0, 0.2).unwrap(), 1e-12).unwrap();
    let series = CoefficientSeries::new(full.coeffs()[..9].to_vec()).unwrap();
    let spec = ProbeSpec::new(ProbeDistribution::Gaussian, 16).unwrap();
    // E[(xᵀT̂_k x)²] by a pilot run
    let mut rng = stream(12, 0, 0);
    let mut second = vec![0.0; 9];
    let pilot = 4000;
    for _ in 0..pilot {
        let x = probe(spec, &mut rng);
        let mut rec = ChebRecursion::new(&op, &x).unwrap();
        second[0] += dot(&x, &x).powi(2);
        for s in second.iter_mut().skip(1) {
            let t = rec.advance(&mut rng);
            *s += dot(&x, t).powi(2);
        }
    }
    second.iter_mut().for_each(|s| *s /= pilot as f64);
    let plain = build_proposal(&series).unwrap();
    let opt = optimal_proposal(&series, &second).unwrap();
    let run = |p: &chebdos_core::proposal::Proposal, seed: u64| {
        let mut rng = stream(seed, 0, 0);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| {
                let x = probe(spec, &mut rng);
                let (k, w) = sample_index(p, &mut rng);
                let mut rec = ChebRecursion::new(&op, &x).unwrap();
                w * dot(&x, rec.advance_to(k, &mut rng))
            })
            .collect();
        variance(&draws)
    };
    let (v_plain, v_opt) = (run(&plain, 13), run(&opt, 14));
    assert!(v_opt <= v_plain * 1.02, "optimal {v_opt} vs plain {v_plain}");
}

#[test]
fn gaussian_probe_covariance_is_identity() {
    let spec = ProbeSpec::new(ProbeDistribution::Gaussian, 8).unwrap();
    let mut rng = stream(15, 0, 0);
    let n = 100_000;
    let xs: Vec<Vec<f64>> = (0..n).map(|_| probe(spec, &mut rng)).collect();
    for i in 0..8 {
        for j in i..8 {
            let prods: Vec<f64> = xs.iter().map(|x| x[i] * x[j]).collect();
            let (m, se) = mean_and_stderr(&prods);
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((m - target).abs() < 5.0 * se, "({i},{j}): {m}");
        }
    }
}

#[test]
fn noisy_petersen_trace_is_zero() {
    let spec = KneserSpec::new(5, 2).unwrap();
    let op = kneser_operator(spec, NoiseModel::new(NoiseKind::AdditiveNonzero, 0.1).unwrap(), 1 << 20).unwrap();
    let est = sh_trace(&op, ProbeSpec::new(ProbeDistribution::Gaussian, 10).unwrap(), 50_000, &mut stream(16, 0, 0))
        .unwrap();
    assert!(est.mean.abs() < 5.0 * est.stderr, "{est:?}");
}

fn pipeline_vs_oracle(mode: Mode, probe: ProbeDistribution) {
    let m = random_symmetric(64, 17);
    let dense = m.to_nalgebra();
    let eig = symmetric_eigenvalues(&dense);
    let bound = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let op = rescale(m, bound, 0.05 * bound).unwrap();
    let eig: Vec<f64> = eig.iter().map(|v| v / op.divisor()).collect();
    let kappa = 40.0;
    let mut config = RunConfig::new(kappa, uniform_grid(9).unwrap(), 21);
    config.n_probes = 400;
    config.n_indices_per_probe = 50;
    config.mode = mode;
    config.probe = probe;
    let est = estimate_density(&op, &config, &Sequential).unwrap();
    for (i, &l) in config.grid.iter().enumerate() {
        let truth: f64 =
            eig.iter().map(|&e| kernel_eval(l, VonMisesParams::new(kappa, e).unwrap()).unwrap()).sum::<f64>() / 64.0;
        let z = (est.density[i] - truth) / est.stderr[i];
        assert!(z.abs() < 5.0, "{mode:?} λ={l}: {} vs {truth} (z {z})", est.density[i]);
    }
}

#[test]
fn pipeline_matches_dense_smoothed_truth() {
    pipeline_vs_oracle(Mode::FaithfulPerLambda, ProbeDistribution::Gaussian);
    pipeline_vs_oracle(Mode::SharedMoments, ProbeDistribution::Rademacher);
}

#[test]
fn pipeline_is_unbiased_on_noisy_operator() {
    let (op, mean) = noisy_rescaled(16, 22, NoiseKind::AdditiveNonzero, 0.05);
    let eig = symmetric_eigenvalues(&mean);
    let kappa = 20.0;
    let grid = vec![-0.6, -0.3, 0.0, 0.3, 0.6];
    for mode in [Mode::FaithfulPerLambda, Mode::SharedMoments] {
        let mut config = RunConfig::new(kappa, grid.clone(), 23);
        config.n_probes = 100_000;
        config.n_indices_per_probe = 1;
        config.mode = mode;
        let est = estimate_density(&op, &config, &Sequential).unwrap();
        for (i, &l) in grid.iter().enumerate() {
            let truth: f64 =
                eig.iter().map(|&e| kernel_eval(l, VonMisesParams::new(kappa, e).unwrap()).unwrap()).sum::<f64>() / 16.0;
            let z = (est.density[i] - truth) / est.stderr[i];
            assert!(z.abs() < 5.0, "{mode:?} λ={l}: {} vs {truth} (z {z})", est.density[i]);
        }
    }
}

#[test]
fn modes_agree_on_deterministic_operator() {
    let m = random_symmetric(64, 24);
    let bound = materialize(&m, &mut stream(0, 0, 0)).map(|d| chebdos_core::linalg::spectral_norm(&d)).unwrap();
    let op = rescale(m, bound, 0.05 * bound).unwrap();
    let grid = uniform_grid(7).unwrap();
    let run = |mode| {
        let mut c = RunConfig::new(30.0, grid.clone(), 25);
        c.n_probes = 300;
        c.n_indices_per_probe = 40;
        c.mode = mode;
        estimate_density(&op, &c, &Sequential).unwrap()
    };
    let (a, b) = (run(Mode::FaithfulPerLambda), run(Mode::SharedMoments));
    for (i, l) in grid.iter().enumerate() {
        let se = (a.stderr[i].powi(2) + b.stderr[i].powi(2)).sqrt();
        assert!((a.density[i] - b.density[i]).abs() < 5.0 * se, "λ={l}");
    }
}

#[test]
fn noise_wrapper_keeps_the_mean() {
    let m = random_symmetric(6, 26);
    let noisy = Noisy::new(m.clone(), NoiseModel::new(NoiseKind::Multiplicative, 0.3).unwrap());
    let x = vec![1.0, 0.0, -1.0, 0.5, 2.0, -0.3];
    let exact = apply(&m, &x, &mut stream(0, 0, 0)).unwrap();
    let mut rng = stream(27, 0, 0);
    let n = 50_000;
    let draws: Vec<Vec<f64>> = (0..n).map(|_| apply(&noisy, &x, &mut rng).unwrap()).collect();
    for i in 0..6 {
        let col: Vec<f64> = draws.iter().map(|d| d[i]).collect();
        let (mu, se) = mean_and_stderr(&col);
        assert!((mu - exact[i]).abs() < 5.0 * se);
    }
}
