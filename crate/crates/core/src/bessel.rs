//! Modified Bessel functions of the first kind, as needed by the von Mises
//! kernel: the exponentially scaled `I_0`, and the ratios `I_k(κ)/I_0(κ)`.
//!
//! Only scaled values and ratios are formed, so nothing overflows at the
//! large concentrations (κ ~ 10³–10⁴) the kernel is used with.

use alloc::vec::Vec;

// Chebyshev coefficients for exp(-x) I0(x), Cephes `i0e`.
const I0E_SMALL: [f64; 30] = [
    -4.415_341_646_479_339_5E-18,
    3.330_794_518_822_238_4E-17,
    -2.431_279_846_547_955E-16,
    1.715_391_285_555_133E-15,
    -1.168_533_287_799_345_1E-14,
    7.676_185_498_604_936E-14,
    -4.856_446_783_111_929E-13,
    2.955_052_663_129_64E-12,
    -1.726_826_291_441_556E-11,
    9.675_809_035_373_237E-11,
    -5.189_795_601_635_263E-10,
    2.659_823_724_682_386_6E-9,
    -1.300_025_009_986_248E-8,
    6.046_995_022_541_919E-8,
    -2.670_793_853_940_612E-7,
    1.117_387_539_120_103_7E-6,
    -4.416_738_358_458_750_5E-6,
    1.644_844_807_072_889_6E-5,
    -5.754_195_010_082_104E-5,
    1.885_028_850_958_416_5E-4,
    -5.763_755_745_385_824E-4,
    1.639_475_616_941_335_7E-3,
    -4.324_309_995_050_576E-3,
    1.054_646_039_459_499_8E-2,
    -2.373_741_480_589_947E-2,
    4.930_528_423_967_071E-2,
    -9.490_109_704_804_764E-2,
    1.716_209_015_222_087_7E-1,
    -3.046_826_723_431_984E-1,
    6.767_952_744_094_761E-1,
];
const I0E_LARGE: [f64; 25] = [
    -7.233_180_487_874_754E-18,
    -4.830_504_485_944_182E-18,
    4.465_621_420_296_76E-17,
    3.461_222_867_697_461E-17,
    -2.827_623_980_516_583_6E-16,
    -3.425_485_619_677_219E-16,
    1.772_560_133_056_526_3E-15,
    3.811_680_669_352_622_4E-15,
    -9.554_846_698_828_307E-15,
    -4.150_569_347_287_222E-14,
    1.540_086_217_521_41E-14,
    3.852_778_382_742_142_6E-13,
    7.180_124_451_383_666E-13,
    -1.794_178_531_506_806_2E-12,
    -1.321_581_184_044_771_3E-11,
    -3.149_916_527_963_241_6E-11,
    1.188_914_710_784_643_9E-11,
    4.940_602_388_224_97E-10,
    3.396_232_025_708_386_5E-9,
    2.266_668_990_498_178E-8,
    2.048_918_589_469_063_8E-7,
    2.891_370_520_834_756_7E-6,
    6.889_758_346_916_825E-5,
    3.369_116_478_255_694_3E-3,
    8.044_904_110_141_088E-1,
];

fn chbevl(x: f64, coeffs: &[f64]) -> f64 {
    let mut b0 = coeffs[0];
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in &coeffs[1..] {
        b2 = b1;
        b1 = b0;
        b0 = x * b1 - b2 + c;
    }
    0.5 * (b0 - b2)
}

/// `e^{-|x|} I_0(x)`.
pub fn i0e(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 8.0 {
        chbevl(0.5 * ax - 2.0, &I0E_SMALL)
    } else {
        chbevl(32.0 / ax - 2.0, &I0E_LARGE) / libm::sqrt(ax)
    }
}

/// Concentrations at or above this use the Gaussian ratio approximation.
pub const GAUSSIAN_REGIME: f64 = 500.0;

/// `exp(-k² / (2κ))`, the large-κ approximation of `I_k(κ)/I_0(κ)`.
pub fn ratio_gaussian(k: usize, kappa: f64) -> f64 {
    let k = k as f64;
    libm::exp(-0.5 * k * k / kappa)
}

/// `I_k(κ)/I_0(κ)` for `k = 0..=k_max` by backward recurrence on successive
/// ratios `r_j = I_j/I_{j-1} = 1 / (2j/κ + r_{j+1})`.
///
/// The recurrence is started far enough above `k_max` that the start error is
/// damped by `(I_N/I_{k_max})²`, below double precision.
pub fn ratios_exact(k_max: usize, kappa: f64) -> Vec<f64> {
    assert!(kappa > 0.0, "kappa must be positive");
    let start = k_max + 32 + libm::ceil(10.0 * libm::sqrt(kappa)) as usize;
    let nf = start as f64;
    // r_N ≈ κ / (N + sqrt(N² + κ²)), an Amos-type estimate
    let mut r = kappa / (nf + libm::sqrt(nf * nf + kappa * kappa));
    let mut step = Vec::with_capacity(k_max + 1);
    step.resize(k_max + 1, 0.0);
    for j in (1..start).rev() {
        r = 1.0 / (2.0 * j as f64 / kappa + r);
        if j <= k_max {
            step[j] = r;
        }
    }
    let mut out = Vec::with_capacity(k_max + 1);
    let mut acc = 1.0;
    out.push(1.0);
    for &s in &step[1..] {
        acc *= s;
        out.push(acc);
    }
    out
}

pub fn ratios_gaussian(k_max: usize, kappa: f64) -> Vec<f64> {
    (0..=k_max).map(|k| ratio_gaussian(k, kappa)).collect()
}

/// Regime-dispatched ratios: exact below [`GAUSSIAN_REGIME`], Gaussian above.
pub fn bessel_ratios(k_max: usize, kappa: f64) -> Vec<f64> {
    if kappa < GAUSSIAN_REGIME {
        ratios_exact(k_max, kappa)
    } else {
        ratios_gaussian(k_max, kappa)
    }
}

/// `I_k(κ)/I_0(κ)`, in `(0, 1]`.
pub fn bessel_ratio(k: usize, kappa: f64) -> f64 {
    if kappa < GAUSSIAN_REGIME {
        ratios_exact(k, kappa)[k]
    } else {
        ratio_gaussian(k, kappa)
    }
}
