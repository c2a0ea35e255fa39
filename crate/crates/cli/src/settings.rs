//! Typed, validated job settings and operator construction.

use chebdos_core::ensembles::analytic::{mp_shift, ContinuousLaw};
use chebdos_core::ensembles::{
    kneser_operator, kneser_spectrum, mixture_sample, wigner_sample, wishart_sample, AnalyticSpectrum, KneserSpec,
    MixtureSpec, WishartSpec,
};
use chebdos_core::operator::{
    affine, estimate_operator_norm, rescale, Axis, Diagonal, LinearOperator, NoiseKind, NoiseModel, Noisy, Rescaled,
};
use chebdos_core::pipeline::{chebyshev_grid, uniform_grid, Mode, RunConfig};
use chebdos_core::rng::stream;
use chebdos_core::trace::{ControlVariate, ProbeDistribution};

use crate::config::Config;
use crate::error::CliError;

/// Stream lane for sampling random ensembles.
pub const SAMPLE_LANE: u64 = u64::MAX - 2;
/// Stream lane for power iteration.
pub const NORM_LANE: u64 = u64::MAX - 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Ensemble {
    Kneser(KneserSpec),
    Wigner { dim: usize },
    Wishart(WishartSpec),
    Mixture { spec: MixtureSpec, dim: usize },
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    None,
    MarchenkoPastur,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormSource {
    Auto,
    Power,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Chebyshev,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CvSetting {
    None,
    Identity { alpha: f64, c: f64 },
    DiagonalReuse { batch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub ensemble: Ensemble,
    pub noise: NoiseKind,
    pub noise_multiple: f64,
    pub shift: Shift,
    pub norm_source: NormSource,
    pub norm_iterations: usize,
    pub margin: f64,
    pub kappa: Option<f64>,
    pub grid: GridKind,
    pub grid_points: usize,
    pub n_probes: usize,
    pub n_indices_per_probe: usize,
    pub mode: Mode,
    pub tail_tol: f64,
    pub probe: ProbeDistribution,
    pub cv: CvSetting,
    pub seed: Option<u64>,
    pub budget_bytes: u64,
    pub n_boot: usize,
    pub ci_level: f64,
    pub max_abs_z: f64,
    pub max_iae: f64,
    pub max_index_error: f64,
    pub gammas: Vec<f64>,
}

fn choice<T: Copy>(cfg: &Config, key: &str, options: &[(&str, T)]) -> Result<T, CliError> {
    let v = cfg.raw(key).unwrap_or("");
    options.iter().find(|o| o.0 == v).map(|o| o.1).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|o| o.0).collect();
        CliError::Config(format!("`{key}` must be one of {}, got `{v}`", names.join(" | ")))
    })
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("`{key}` must be positive and finite")))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize, CliError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("`{key}` must be at least 1")))
    }
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Result<Self, CliError> {
        let dim = at_least_one("dim", cfg.require("dim")?)?;
        let phi = positive("phi", cfg.require("phi")?)?;
        let sigma2 = positive("sigma2", cfg.require("sigma2")?)?;
        let kind = cfg.raw("ensemble").unwrap_or("");
        let ensemble = match kind {
            "kneser" => Ensemble::Kneser(KneserSpec::new(cfg.require("kneser_n")?, cfg.require("kneser_k")?)?),
            "wigner" => Ensemble::Wigner { dim },
            "wishart" => Ensemble::Wishart(WishartSpec::from_ratio(dim, phi, sigma2)?),
            "mixture" => Ensemble::Mixture { spec: MixtureSpec::new(cfg.require("gamma")?, phi)?, dim },
            "diagonal" => {
                let values = cfg.list("diagonal")?;
                if values.is_empty() {
                    return Err(CliError::Config("`diagonal` must list at least one eigenvalue".into()));
                }
                Ensemble::Diagonal(values)
            }
            other => return Err(CliError::Config(format!("unknown ensemble `{other}`"))),
        };
        let noise = choice(
            cfg,
            "noise",
            &[("none", NoiseKind::None), ("additive", NoiseKind::AdditiveNonzero), ("multiplicative", NoiseKind::Multiplicative)],
        )?;
        let noise_multiple: f64 = cfg.require("noise_multiple")?;
        if !(noise_multiple >= 0.0) || !noise_multiple.is_finite() {
            return Err(CliError::Config("`noise_multiple` must be nonnegative".into()));
        }
        let shift = choice(cfg, "shift", &[("none", Shift::None), ("mp", Shift::MarchenkoPastur)])?;
        if shift == Shift::MarchenkoPastur && !matches!(ensemble, Ensemble::Wishart(_)) {
            return Err(CliError::Config("`shift = mp` applies to the wishart ensemble only".into()));
        }
        let norm_source =
            choice(cfg, "norm_bound", &[("auto", NormSource::Auto), ("power", NormSource::Power), ("exact", NormSource::Exact)])?;
        let margin: f64 = cfg.require("margin")?;
        if !(margin > 0.0 && margin < 1.0) {
            return Err(CliError::Config("`margin` must lie in (0, 1)".into()));
        }
        let kappa = cfg.get::<f64>("kappa")?.map(|k| positive("kappa", k)).transpose()?;
        let cv = match cfg.raw("control_variate").unwrap_or("") {
            "none" => CvSetting::None,
            "identity" => CvSetting::Identity { alpha: cfg.require("cv_alpha")?, c: cfg.require("cv_c")? },
            "diagonal_reuse" => CvSetting::DiagonalReuse { batch: at_least_one("cv_batch", cfg.require("cv_batch")?)? },
            other => return Err(CliError::Config(format!("unknown control_variate `{other}`"))),
        };
        let ci_level: f64 = cfg.require("ci_level")?;
        if !(ci_level > 0.0 && ci_level < 1.0) {
            return Err(CliError::Config("`ci_level` must lie in (0, 1)".into()));
        }
        let gammas = cfg.list("gammas")?;
        if gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(CliError::Config("`gammas` must lie in [0, 1]".into()));
        }
        let tail_tol = positive("tail_tol", cfg.require("tail_tol")?)?;
        let budget_mb: u64 = cfg.require("memory_budget_mb")?;
        let n_boot: usize = cfg.require("n_boot")?;
        if n_boot < 2 {
            return Err(CliError::Config("`n_boot` must be at least 2".into()));
        }
        Ok(Settings {
            ensemble,
            noise,
            noise_multiple,
            shift,
            norm_source,
            norm_iterations: at_least_one("norm_iterations", cfg.require("norm_iterations")?)?,
            margin,
            kappa,
            grid: choice(cfg, "grid", &[("chebyshev", GridKind::Chebyshev), ("uniform", GridKind::Uniform)])?,
            grid_points: at_least_one("grid_points", cfg.require("grid_points")?)?,
            n_probes: at_least_one("n_probes", cfg.require("n_probes")?)?,
            n_indices_per_probe: at_least_one("n_indices_per_probe", cfg.require("n_indices_per_probe")?)?,
            mode: choice(cfg, "mode", &[("faithful", Mode::FaithfulPerLambda), ("shared", Mode::SharedMoments)])?,
            tail_tol,
            probe: choice(cfg, "probe", &[("gaussian", ProbeDistribution::Gaussian), ("rademacher", ProbeDistribution::Rademacher)])?,
            cv,
            seed: cfg.get("seed")?,
            budget_bytes: budget_mb.saturating_mul(1 << 20),
            n_boot,
            ci_level,
            max_abs_z: positive("max_abs_z", cfg.require("max_abs_z")?)?,
            max_iae: positive("max_iae", cfg.require("max_iae")?)?,
            max_index_error: positive("max_index_error", cfg.require("max_index_error")?)?,
            gammas,
        })
    }

    pub fn require_kappa(&self) -> Result<f64, CliError> {
        self.kappa.ok_or_else(|| CliError::Config("missing required key `kappa`".into()))
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("missing required key `seed` (or --seed)".into()))
    }

    pub fn grid_values(&self) -> Result<Vec<f64>, CliError> {
        Ok(match self.grid {
            GridKind::Chebyshev => chebyshev_grid(self.grid_points)?,
            GridKind::Uniform => uniform_grid(self.grid_points)?,
        })
    }

    pub fn run_config(&self, dim: usize, seed: u64) -> Result<RunConfig, CliError> {
        let mut rc = RunConfig::new(self.require_kappa()?, self.grid_values()?, seed);
        rc.n_probes = self.n_probes;
        rc.n_indices_per_probe = self.n_indices_per_probe;
        rc.mode = self.mode;
        rc.tail_tol = self.tail_tol;
        rc.probe = self.probe;
        match self.cv {
            CvSetting::None => {}
            CvSetting::Identity { alpha, c } => rc.control_variate = Some(ControlVariate::scaled_identity(alpha, dim, c)),
            CvSetting::DiagonalReuse { batch } => rc.diagonal_reuse_batch = Some(batch),
        }
        rc.validate()?;
        Ok(rc)
    }

    pub fn dim(&self) -> usize {
        match &self.ensemble {
            Ensemble::Kneser(s) => s.vertex_count() as usize,
            Ensemble::Wigner { dim } | Ensemble::Mixture { dim, .. } => *dim,
            Ensemble::Wishart(w) => w.d,
            Ensemble::Diagonal(v) => v.len(),
        }
    }
}

/// A rescaled operator ready for the pipeline plus its reference spectrum.
pub struct Built {
    pub op: Rescaled<Box<dyn LinearOperator>>,
    /// Reference spectrum on the rescaled axis, when one is known.
    pub truth: Option<AnalyticSpectrum>,
    /// Dense matrix backing a sampled ensemble, on the original axis.
    pub dense: Option<chebdos_core::operator::DenseSymmetric>,
    pub norm_bound: f64,
    pub norm_exact: bool,
}

impl Built {
    pub fn axis(&self) -> Axis {
        self.op.axis()
    }
}

/// Samples (if random) and rescales the configured ensemble; `sample_index`
/// selects an independent draw.
pub fn build(settings: &Settings, ensemble: &Ensemble, seed: u64, sample_index: u64) -> Result<Built, CliError> {
    let dim = match ensemble {
        Ensemble::Kneser(s) => s.vertex_count() as usize,
        Ensemble::Wigner { dim } | Ensemble::Mixture { dim, .. } => *dim,
        Ensemble::Wishart(w) => w.d,
        Ensemble::Diagonal(v) => v.len(),
    };
    let noise = NoiseModel::per_dimension(settings.noise, settings.noise_multiple, dim)?;
    let budget = settings.budget_bytes;
    let mut rng = stream(seed, SAMPLE_LANE, sample_index);
    let (base, exact, truth, dense): (Box<dyn LinearOperator>, Option<f64>, Option<AnalyticSpectrum>, _) = match ensemble {
        Ensemble::Kneser(spec) => {
            let op = kneser_operator(*spec, noise, budget)?;
            (Box::new(op), Some(spec.degree() as f64), Some(kneser_spectrum(*spec)), None)
        }
        Ensemble::Diagonal(values) => {
            let exact = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut pairs: Vec<(f64, u64)> = Vec::new();
            for &v in values {
                match pairs.iter_mut().find(|p| p.0 == v) {
                    Some(p) => p.1 += 1,
                    None => pairs.push((v, 1)),
                }
            }
            let op = Noisy::new(Diagonal::new(values.clone())?, noise);
            (Box::new(op), Some(exact), Some(AnalyticSpectrum::discrete(pairs)), None)
        }
        Ensemble::Wigner { dim } => {
            let m = wigner_sample(*dim, budget, &mut rng)?;
            let truth = AnalyticSpectrum::continuous(ContinuousLaw::Semicircle);
            (Box::new(Noisy::new(m.clone(), noise)), None, Some(truth), Some(m))
        }
        Ensemble::Wishart(spec) => {
            let m = wishart_sample(*spec, budget, &mut rng)?;
            let law = ContinuousLaw::MarchenkoPastur { phi: spec.phi(), sigma2: spec.sigma2 };
            let noisy: Box<dyn LinearOperator> = Box::new(Noisy::new(m.clone(), noise));
            let truth = AnalyticSpectrum::continuous(law);
            if settings.shift == Shift::MarchenkoPastur {
                let (a, b) = mp_shift(spec.phi(), spec.sigma2);
                let shifted = affine(noisy, a, b);
                (Box::new(shifted) as Box<dyn LinearOperator>, None, Some(truth), Some(m))
            } else {
                (noisy, None, Some(truth), Some(m))
            }
        }
        Ensemble::Mixture { spec, dim } => {
            let m = mixture_sample(*spec, *dim, budget, &mut rng)?;
            (Box::new(Noisy::new(m.clone(), noise)), None, None, Some(m))
        }
    };
    let (bound, norm_exact) = match (settings.norm_source, exact) {
        (NormSource::Exact, None) => {
            return Err(CliError::Config("`norm_bound = exact` is only available for kneser and diagonal".into()))
        }
        (NormSource::Exact | NormSource::Auto, Some(b)) => (b, true),
        _ => {
            let mut nrng = stream(seed, NORM_LANE, sample_index);
            (estimate_operator_norm(&base, settings.norm_iterations, &mut nrng)?.value, false)
        }
    };
    if !(bound > 0.0) {
        return Err(CliError::Config("operator norm is zero; nothing to rescale".into()));
    }
    let op = rescale(base, bound, settings.margin * bound)?;
    let truth = truth.map(|t| t.map(op.axis()));
    Ok(Built { op, truth, dense, norm_bound: bound, norm_exact })
}
