//! Adaptive Gauss–Kronrod (7/15) quadrature.

use alloc::vec::Vec;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`, bisecting the
/// worst interval until the error estimate is met or `max_intervals` is hit.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_intervals: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    // a fixed initial partition keeps narrow features from slipping between nodes
    const START: usize = 16;
    let h = (b - a) / START as f64;
    let mut parts: Vec<(f64, f64, f64, f64)> = (0..START)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == START { b } else { lo + h };
            let (v, e) = kronrod(&mut f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    let mut err: f64 = parts.iter().map(|p| p.3).sum();
    while err > tol && parts.len() < max_intervals {
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, e) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let left = kronrod(&mut f, lo, mid);
        let right = kronrod(&mut f, mid, hi);
        err += left.1 + right.1 - e;
        parts.push((lo, mid, left.0, left.1));
        parts.push((mid, hi, right.0, right.1));
    }
    parts.iter().map(|p| p.2).sum()
}
