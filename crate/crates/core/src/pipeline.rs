//! Smoothed spectral density estimation over a grid of query points.
//!
//! Every unit of Monte Carlo work (one probe, or one probe at one grid point)
//! owns an RNG stream derived from the seed and the unit's coordinates. Units
//! are handed to an [`Executor`] that must return results in index order, so
//! the output does not depend on how units are spread over workers.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::chebyshev::ChebRecursion;
use crate::error::{invalid, Error, Result};
use crate::linalg::dot;
use crate::operator::LinearOperator;
use crate::proposal::{build_proposal, sample_index, Proposal};
use crate::rng::{stream, uniform, Stream};
use crate::stats::RunningStats;
use crate::trace::{probe_into, ControlVariate, ProbeDistribution};
use crate::vonmises::{kernel_coeffs, normalizer_bound, CoefficientSeries, VonMisesParams, DEFAULT_TAIL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Independent probes, orders and recursions at every grid point.
    #[default]
    FaithfulPerLambda,
    /// One recursion per probe up to the largest truncation order, reused by
    /// every grid point.
    SharedMoments,
}

/// Ordered parallel map. `map(n, f)` must return `[f(0), .., f(n-1)]`.
pub trait Executor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(f).collect()
    }
}

/// Chebyshev nodes `−cos(π(i + ½)/n)`, ascending, uniform in `arccos λ`.
pub fn chebyshev_grid(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("grid_points", "must be at least 1"));
    }
    Ok((0..n).map(|i| -libm::cos(PI * (i as f64 + 0.5) / n as f64)).collect())
}

/// Cell midpoints of a uniform partition of `(−1, 1)`.
pub fn uniform_grid(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("grid_points", "must be at least 1"));
    }
    Ok((0..n).map(|i| -1.0 + (2 * i + 1) as f64 / n as f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kappa: f64,
    pub grid: Vec<f64>,
    pub n_probes: usize,
    pub n_indices_per_probe: usize,
    pub seed: u64,
    pub control_variate: Option<ControlVariate>,
    /// Probe batch size for diagonal control variates estimated from earlier
    /// batches (`c = 1`). Mutually exclusive with `control_variate`.
    pub diagonal_reuse_batch: Option<usize>,
    pub mode: Mode,
    pub tail_tol: f64,
    pub probe: ProbeDistribution,
}

impl RunConfig {
    pub fn new(kappa: f64, grid: Vec<f64>, seed: u64) -> Self {
        RunConfig {
            kappa,
            grid,
            n_probes: 100,
            n_indices_per_probe: 1000,
            seed,
            control_variate: None,
            diagonal_reuse_batch: None,
            mode: Mode::FaithfulPerLambda,
            tail_tol: DEFAULT_TAIL_TOL,
            probe: ProbeDistribution::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(invalid("kappa", "must be positive and finite"));
        }
        if self.grid.is_empty() {
            return Err(invalid("grid", "must not be empty"));
        }
        if let Some(&v) = self.grid.iter().find(|v| !(v.abs() < 1.0)) {
            return Err(Error::Domain { value: v });
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("grid", "must be strictly increasing"));
        }
        if self.n_probes == 0 {
            return Err(invalid("n_probes", "must be at least 1"));
        }
        if self.n_indices_per_probe == 0 {
            return Err(invalid("n_indices_per_probe", "must be at least 1"));
        }
        if !(self.tail_tol > 0.0) {
            return Err(invalid("tail_tol", "must be positive"));
        }
        match (self.diagonal_reuse_batch, &self.control_variate) {
            (Some(0), _) => return Err(invalid("diagonal_reuse_batch", "must be at least 1")),
            (Some(_), Some(_)) => {
                return Err(invalid("diagonal_reuse_batch", "cannot be combined with a fixed control variate"))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Density curve with per-point Monte Carlo uncertainty and run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: Vec<u64>,
    /// Per grid point, per probe values; NaN marks an excluded overflow sample.
    pub samples: Vec<Vec<f64>>,
    pub overflow_count: u64,
    pub dim: usize,
    pub k_max: usize,
    /// `π Σ_k |γ_k|` per grid point.
    pub normalizers: Vec<f64>,
    pub normalizer_bound: f64,
}

impl DensityEstimate {
    pub fn normalizers_within_bound(&self) -> bool {
        self.normalizers.iter().all(|&z| z <= self.normalizer_bound * (1.0 + 1e-12))
    }
}

struct Prepared {
    series: Vec<CoefficientSeries>,
    proposals: Vec<Proposal>,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let mut series = Vec::with_capacity(config.grid.len());
    let mut proposals = Vec::with_capacity(config.grid.len());
    for &lambda in &config.grid {
        let s = kernel_coeffs(VonMisesParams::new(config.kappa, lambda)?, config.tail_tol)?;
        proposals.push(build_proposal(&s)?);
        series.push(s);
    }
    Ok(Prepared { series, proposals })
}

/// Lane of the RNG stream used by shared-moment probes.
const SHARED_LANE: u64 = u64::MAX;

struct Unit {
    /// Per-probe density sample(s); NaN when the recursion overflowed.
    values: Vec<f64>,
    overflow: bool,
    diag: Option<Vec<f64>>,
}

fn diag_sample(x: &[f64], t1: &[f64]) -> Vec<f64> {
    x.iter().zip(t1).map(|(a, b)| a * b).collect()
}

fn faithful_unit<O: LinearOperator + ?Sized>(
    op: &O,
    config: &RunConfig,
    prep: &Prepared,
    cv: Option<&ControlVariate>,
    want_diag: bool,
    i: usize,
    p: usize,
) -> Unit {
    let mut rng = stream(config.seed, i as u64, p as u64);
    let d = op.dim();
    let mut x = vec![0.0; d];
    probe_into(config.probe, &mut x, &mut rng);
    let proposal = &prep.proposals[i];
    let mut counts = vec![0u32; proposal.k_max() + 1];
    let mut top = 0;
    for _ in 0..config.n_indices_per_probe {
        let (k, _) = sample_index(proposal, &mut rng);
        counts[k] += 1;
        top = top.max(k);
    }
    let correction = cv.map_or(0.0, |c| c.correction(&x));
    let weights = proposal.weights();
    // Algorithm-2 form: weight · (xᵀT̂_k x − c(xᵀBx − tr B)) per sampled order
    let mut total = counts[0] as f64 * weights[0] * (dot(&x, &x) - correction);
    let mut rec = match ChebRecursion::new(op, &x) {
        Ok(r) => r,
        Err(_) => unreachable!("probe built with operator dimension"),
    };
    let mut diag = None;
    let last = if want_diag { top.max(1) } else { top };
    for j in 1..=last {
        let t = rec.advance(&mut rng);
        if j == 1 && want_diag {
            diag = Some(diag_sample(&x, t));
        }
        if j <= top && counts[j] > 0 {
            total += counts[j] as f64 * weights[j] * (dot(&x, t) - correction);
        }
    }
    let overflow = rec.overflow_level().is_some_and(|l| l <= top);
    let scale = prep.series[i].jacobian() / (config.n_indices_per_probe as f64 * d as f64);
    let value = if overflow { f64::NAN } else { total * scale };
    Unit { values: vec![value], overflow, diag: if overflow { None } else { diag } }
}

fn shared_unit<O: LinearOperator + ?Sized>(
    op: &O,
    config: &RunConfig,
    prep: &Prepared,
    cv: Option<&ControlVariate>,
    want_diag: bool,
    k_all: usize,
    p: usize,
) -> Unit {
    let mut rng = stream(config.seed, SHARED_LANE, p as u64);
    let d = op.dim();
    let mut x = vec![0.0; d];
    probe_into(config.probe, &mut x, &mut rng);
    let mut moments = Vec::with_capacity(k_all + 1);
    moments.push(dot(&x, &x));
    let mut rec = match ChebRecursion::new(op, &x) {
        Ok(r) => r,
        Err(_) => unreachable!("probe built with operator dimension"),
    };
    let mut diag = None;
    let last = if want_diag { k_all.max(1) } else { k_all };
    for j in 1..=last {
        let t = rec.advance(&mut rng);
        if j == 1 && want_diag {
            diag = Some(diag_sample(&x, t));
        }
        if j <= k_all {
            moments.push(dot(&x, t));
        }
    }
    let overflow = rec.overflow_level().is_some_and(|l| l <= k_all);
    let correction = cv.map_or(0.0, |c| c.correction(&x));
    let values = prep
        .series
        .iter()
        .map(|s| {
            if overflow {
                return f64::NAN;
            }
            let g = s.coeffs();
            let raw: f64 = g.iter().zip(&moments).map(|(g, m)| g * m).sum();
            let sum_g: f64 = g.iter().sum();
            s.jacobian() * (raw - correction * sum_g) / d as f64
        })
        .collect();
    Unit { values, overflow, diag: if overflow { None } else { diag } }
}

/// Estimates the κ-smoothed spectral density of `op` at every grid point.
///
/// `op` must be rescaled so that its recorded spectral bound lies below 1.
pub fn estimate_density<O, E>(op: &O, config: &RunConfig, exec: &E) -> Result<DensityEstimate>
where
    O: LinearOperator + ?Sized,
    E: Executor,
{
    config.validate()?;
    match op.spectral_bound() {
        Some(b) if b < 1.0 => {}
        bound => return Err(Error::NotRescaled { bound }),
    }
    if let Some(cv) = &config.control_variate {
        if cv.dim() != op.dim() {
            return Err(Error::DimensionMismatch { expected: op.dim(), got: cv.dim() });
        }
    }
    let prep = prepare(config)?;
    let n_grid = config.grid.len();
    let n_probes = config.n_probes;
    let k_all = prep.series.iter().map(|s| s.k_max()).max().unwrap_or(0);

    let batch = config.diagonal_reuse_batch.unwrap_or(n_probes).min(n_probes);
    let reuse = config.diagonal_reuse_batch.is_some();
    let mut samples = vec![vec![f64::NAN; n_probes]; n_grid];
    let mut overflow_count = 0u64;
    let mut diag_sum = vec![0.0; if reuse { op.dim() } else { 0 }];
    let mut diag_n = 0u64;

    let mut start = 0;
    while start < n_probes {
        let end = (start + batch).min(n_probes);
        let width = end - start;
        let reuse_cv = if reuse && diag_n > 0 {
            Some(ControlVariate::diagonal(diag_sum.iter().map(|s| s / diag_n as f64).collect(), 1.0))
        } else {
            None
        };
        let cv = reuse_cv.as_ref().or(config.control_variate.as_ref());
        let units = match config.mode {
            Mode::FaithfulPerLambda => exec.map(n_grid * width, |u| {
                let (i, p) = (u / width, start + u % width);
                faithful_unit(op, config, &prep, cv, reuse, i, p)
            }),
            Mode::SharedMoments => exec.map(width, |u| shared_unit(op, config, &prep, cv, reuse, k_all, start + u)),
        };
        for (u, unit) in units.into_iter().enumerate() {
            if unit.overflow {
                overflow_count += 1;
            }
            if let Some(d) = unit.diag {
                diag_sum.iter_mut().zip(&d).for_each(|(s, v)| *s += v);
                diag_n += 1;
            }
            match config.mode {
                Mode::FaithfulPerLambda => samples[u / width][start + u % width] = unit.values[0],
                Mode::SharedMoments => {
                    for (i, v) in unit.values.into_iter().enumerate() {
                        samples[i][start + u] = v;
                    }
                }
            }
        }
        start = end;
    }

    let mut density = Vec::with_capacity(n_grid);
    let mut stderr = Vec::with_capacity(n_grid);
    let mut n_samples = Vec::with_capacity(n_grid);
    for row in &samples {
        let stats: RunningStats = row.iter().copied().filter(|v| !v.is_nan()).collect();
        density.push(stats.mean());
        stderr.push(stats.stderr());
        n_samples.push(stats.count());
    }
    Ok(DensityEstimate {
        grid: config.grid.clone(),
        density,
        stderr,
        n_samples,
        samples,
        overflow_count,
        dim: op.dim(),
        k_max: k_all,
        normalizers: prep.proposals.iter().map(|p| PI * p.normalizer()).collect(),
        normalizer_bound: normalizer_bound(config.kappa),
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let f = pos - lo as f64;
    sorted[lo] * (1.0 - f) + sorted[hi] * f
}

/// Percentile bootstrap interval for the mean of `samples` (NaN entries
/// ignored).
pub fn bootstrap_mean_ci(samples: &[f64], n_boot: usize, level: f64, rng: &mut Stream) -> Result<(f64, f64)> {
    let data: Vec<f64> = samples.iter().copied().filter(|v| !v.is_nan()).collect();
    if data.len() < 2 {
        return Err(invalid("samples", "bootstrap needs at least two samples"));
    }
    if n_boot < 2 {
        return Err(invalid("n_boot", "must be at least 2"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", "must lie in (0, 1)"));
    }
    let n = data.len();
    let mut means: Vec<f64> = (0..n_boot)
        .map(|_| {
            let mut s = 0.0;
            for _ in 0..n {
                let j = ((uniform(rng) * n as f64) as usize).min(n - 1);
                s += data[j];
            }
            s / n as f64
        })
        .collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let tail = 0.5 * (1.0 - level);
    Ok((quantile(&means, tail), quantile(&means, 1.0 - tail)))
}

/// Bootstrap intervals at every grid point; point `i` uses stream `(seed, i)`.
pub fn bootstrap_ci(samples: &[Vec<f64>], n_boot: usize, level: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, row)| bootstrap_mean_ci(row, n_boot, level, &mut stream(seed, i as u64, u64::MAX - 1)))
        .collect()
}

/// Trapezoidal integral of a sampled curve over `[lo, hi] ∩ [grid₀, grid_last]`,
/// interpolating linearly at interior endpoints.
pub fn integrate_curve(grid: &[f64], values: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if grid.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
    }
    if grid.len() < 2 {
        return Err(invalid("grid", "integration needs at least two points"));
    }
    let a = lo.max(grid[0]);
    let b = hi.min(grid[grid.len() - 1]);
    if !(a < b) {
        return Err(Error::EmptyOverlap { lo, hi });
    }
    let interp = |x: f64| -> f64 {
        let j = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1);
        let (x0, x1) = (grid[j - 1], grid[j]);
        let t = (x - x0) / (x1 - x0);
        values[j - 1] * (1.0 - t) + values[j] * t
    };
    let mut pts: Vec<(f64, f64)> = vec![(a, interp(a))];
    for (&g, &v) in grid.iter().zip(values) {
        if g > a && g < b {
            pts.push((g, v));
        }
    }
    pts.push((b, interp(b)));
    Ok(pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum())
}

/// Integral of the mean density over `[lo, hi]`; times `D` it estimates an
/// eigenvalue count.
pub fn integrate_density(est: &DensityEstimate, lo: f64, hi: f64) -> Result<f64> {
    integrate_curve(&est.grid, &est.density, lo, hi)
}

/// The integral over `[lo, hi]` of each probe's own density curve; probes
/// with an excluded sample anywhere on the grid are skipped.
pub fn integrate_probe_samples(est: &DensityEstimate, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let n_probes = est.samples.first().map_or(0, |r| r.len());
    let mut out = Vec::with_capacity(n_probes);
    let mut curve = vec![0.0; est.grid.len()];
    for p in 0..n_probes {
        for (c, row) in curve.iter_mut().zip(&est.samples) {
            *c = row[p];
        }
        if curve.iter().any(|v| v.is_nan()) {
            continue;
        }
        out.push(integrate_curve(&est.grid, &curve, lo, hi)?);
    }
    Ok(out)
}
