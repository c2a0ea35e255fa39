use chebdos_core::bessel::{bessel_ratio, ratios_exact};
use chebdos_core::ensembles::analytic::mp_shift;
use chebdos_core::ensembles::{
    kneser_operator, kneser_spectrum, mixture_sample, smoothed_truth, wishart_sample, ww_index, KneserSpec,
    MixtureSpec, WishartSpec,
};
use chebdos_core::linalg::symmetric_eigenvalues;
use chebdos_core::operator::{estimate_operator_norm, rescale, Axis, LinearOperator, NoiseModel};
use chebdos_core::quad::integrate;
use chebdos_core::rng::stream;
use chebdos_core::trace::{diag_estimate, ProbeDistribution, ProbeSpec};
use chebdos_core::vonmises::{kernel_eval, VonMisesParams};

#[test]
fn petersen_norm_by_power_iteration() {
    let op = kneser_operator(KneserSpec::new(5, 2).unwrap(), NoiseModel::NONE, 1 << 20).unwrap();
    let est = estimate_operator_norm(&op, 200, &mut stream(1, 0, 0)).unwrap();
    assert!((est.value - 3.0).abs() < 1e-6, "{est:?}");
}

#[test]
fn kneser_rescaled_spectrum_stays_inside() {
    let spec = KneserSpec::new(15, 7).unwrap();
    assert_eq!(spec.vertex_count(), 6435);
    assert_eq!(spec.degree(), 8);
    let op = kneser_operator(spec, NoiseModel::NONE, 1 << 30).unwrap();
    let r = rescale(op, 8.0, 0.1).unwrap();
    let mapped = kneser_spectrum(spec).map(r.axis());
    let (lo, hi) = mapped.support();
    assert!((hi - 8.0 / 8.1).abs() < 1e-15);
    assert!(lo > -1.0 && hi < 1.0);
    assert_eq!(mapped.dim(), Some(6435));
}

#[test]
fn shifted_wishart_fills_the_interval() {
    let (phi, sigma2) = (0.5, 1.0);
    let spec = WishartSpec::from_ratio(512, phi, sigma2).unwrap();
    let m = wishart_sample(spec, 1 << 30, &mut stream(2, 0, 0)).unwrap();
    let (a, b) = mp_shift(phi, sigma2);
    let eig = symmetric_eigenvalues(&m.to_nalgebra());
    let shifted: Vec<f64> = eig.iter().map(|&v| Axis { scale: a, shift: b }.forward(v)).collect();
    let lo = shifted.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = shifted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // finite-D edge fluctuations of order D^(-2/3)
    assert!(lo > -1.05 && hi < 1.05, "[{lo}, {hi}]");
    assert!(lo < -0.9 && hi > 0.9);
}

#[test]
fn mixture_index_matches_dense_eigenvalues() {
    let mix = MixtureSpec::new(0.5, 0.5).unwrap();
    let m = mixture_sample(mix, 512, 1 << 30, &mut stream(3, 0, 0)).unwrap();
    let eig = symmetric_eigenvalues(&m.to_nalgebra());
    let frac = eig.iter().filter(|&&v| v < 0.0).count() as f64 / 512.0;
    let theory = ww_index(mix);
    assert!((frac - theory).abs() < 0.02, "{frac} vs {theory}");
}

#[test]
fn petersen_smoothed_bumps_have_multiplicity_masses() {
    let spec = KneserSpec::new(5, 2).unwrap();
    let truth = kneser_spectrum(spec).map(Axis { scale: 1.0 / 3.3, shift: 0.0 });
    let kappa = 1000.0;
    let centers = [-2.0 / 3.3, 1.0 / 3.3, 3.0 / 3.3];
    let mut masses = Vec::new();
    for c in centers {
        let f = |l: f64| smoothed_truth(&truth, kappa, &[l]).unwrap()[0];
        masses.push(integrate(f, c - 0.12, (c + 0.12).min(0.9999), 1e-10, 4000));
    }
    let total: f64 = masses.iter().sum();
    for (m, want) in masses.iter().zip([4.0, 5.0, 1.0]) {
        assert!((m / total - want / 10.0).abs() < 1e-3, "{masses:?}");
    }
}

#[test]
fn kernel_integrates_to_one_and_has_gaussian_width() {
    for &(kappa, center) in &[(10.0, 0.0), (100.0, 0.3), (1000.0, -0.6), (5000.0, 0.8)] {
        let p = VonMisesParams::new(kappa, center).unwrap();
        let f = |l: f64| kernel_eval(l, p).unwrap();
        let mass = integrate(f, -1.0, 1.0, 1e-12, 20_000);
        assert!((mass - 1.0).abs() < 1e-6, "κ={kappa}: {mass}");
        if kappa >= 1000.0 {
            let second = integrate(|l| (l - center).powi(2) * f(l), -1.0, 1.0, 1e-14, 20_000);
            let want = (1.0 - center * center) / kappa;
            assert!((second / want - 1.0).abs() < 0.05, "κ={kappa}: {second} vs {want}");
        }
    }
}

#[test]
fn bessel_ratios_match_power_series() {
    // I_k(κ) = Σ_m (κ/2)^{2m+k} / (m! (m+k)!)
    let series = |k: usize, x: f64| {
        let mut term = (0.5 * x).powi(k as i32) / (1..=k).map(|v| v as f64).product::<f64>();
        let mut sum = term;
        for m in 1..200 {
            term *= (0.5 * x).powi(2) / (m as f64 * (m + k) as f64);
            sum += term;
        }
        sum
    };
    let want = series(3, 10.0) / series(0, 10.0);
    assert!((bessel_ratio(3, 10.0) - want).abs() < 1e-10);
    let exact = ratios_exact(5, 10.0);
    for (k, r) in exact.iter().enumerate() {
        assert!((r - series(k, 10.0) / series(0, 10.0)).abs() < 1e-12);
    }
}

#[test]
fn wishart_diagonal_estimate() {
    let spec = WishartSpec::from_ratio(32, 0.5, 1.0).unwrap();
    let m = wishart_sample(spec, 1 << 20, &mut stream(4, 0, 0)).unwrap();
    let est = diag_estimate(&m, ProbeSpec::new(ProbeDistribution::Gaussian, 32).unwrap(), 100_000, &mut stream(5, 0, 0))
        .unwrap();
    for i in 0..32 {
        assert!((est.mean[i] - m.get(i, i)).abs() < 5.0 * est.stderr[i], "entry {i}");
    }
    assert_eq!(m.dim(), 32);
}
