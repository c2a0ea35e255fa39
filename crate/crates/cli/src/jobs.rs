//! The four subcommands, each producing an [`OutputSet`] without touching disk.

use std::path::Path;
use std::time::Instant;

use chebdos_core::ensembles::{smoothed_truth, ww_index, AnalyticSpectrum, MixtureSpec};
use chebdos_core::linalg::symmetric_eigenvalues;
use chebdos_core::pipeline::{
    bootstrap_mean_ci, estimate_density, integrate_curve, integrate_probe_samples, DensityEstimate,
};
use chebdos_core::rng::stream;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::CliError;
use crate::exec::Threads;
use crate::output::{csv, num, summary_path, OutputSet};
use crate::settings::{build, Built, Ensemble, GridKind, Settings};

/// Stream lane for index bootstrap resampling.
pub const BOOT_LANE: u64 = u64::MAX - 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// What every job receives besides its settings.
pub struct Job<'a> {
    pub config: &'a Config,
    pub settings: &'a Settings,
    pub out: &'a Path,
    pub format: Format,
    pub threads: usize,
}

/// Outcome of a job: files to write and whether its checks passed.
pub struct Outcome {
    pub files: OutputSet,
    pub passed: bool,
}

fn grid_spec(s: &Settings) -> Value {
    let kind = match s.grid {
        GridKind::Chebyshev => "chebyshev",
        GridKind::Uniform => "uniform",
    };
    json!({ "kind": kind, "points": s.grid_points })
}

fn run(job: &Job, built: &Built, seed: u64) -> Result<DensityEstimate, CliError> {
    let rc = job.settings.run_config(built.op.inner().dim(), seed)?;
    Ok(estimate_density(&built.op, &rc, &Threads(job.threads))?)
}

/// Like [`run`] but only on the grid points needed to integrate up to the
/// image of zero: those below it and the first one above.
fn run_below_zero(job: &Job, built: &Built, seed: u64) -> Result<DensityEstimate, CliError> {
    let mut rc = job.settings.run_config(built.op.inner().dim(), seed)?;
    let zero = built.axis().forward(0.0);
    let keep = rc.grid.partition_point(|&g| g < zero) + 1;
    rc.grid.truncate(keep.clamp(2, rc.grid.len()));
    Ok(estimate_density(&built.op, &rc, &Threads(job.threads))?)
}

fn run_meta(job: &Job, built: &Built, est: &DensityEstimate) -> Value {
    let s = job.settings;
    let max_norm = est.normalizers.iter().cloned().fold(0.0, f64::max);
    let axis = built.axis();
    json!({
        "kappa": s.kappa,
        "grid": grid_spec(s),
        "threads": job.threads,
        "dim": est.dim,
        "n_probes": s.n_probes,
        "n_indices_per_probe": s.n_indices_per_probe,
        "k_max": est.k_max,
        "tail_tol": s.tail_tol,
        "overflow_count": est.overflow_count,
        "norm_bound": built.norm_bound,
        "norm_bound_exact": built.norm_exact,
        "axis": { "scale": axis.scale, "shift": axis.shift },
        "normalizer_checks": {
            "bound": est.normalizer_bound,
            "max": max_norm,
            "within_bound": est.normalizers_within_bound(),
        },
    })
}

fn density_rows(est: &DensityEstimate) -> Vec<Vec<String>> {
    (0..est.grid.len())
        .map(|i| vec![num(est.grid[i]), num(est.density[i]), num(est.stderr[i]), est.n_samples[i].to_string()])
        .collect()
}

#[derive(Serialize)]
struct DensityRow {
    lambda: f64,
    density: f64,
    stderr: f64,
    n_samples: u64,
}

fn density_json(est: &DensityEstimate) -> Vec<DensityRow> {
    (0..est.grid.len())
        .map(|i| DensityRow {
            lambda: est.grid[i],
            density: est.density[i],
            stderr: est.stderr[i],
            n_samples: est.n_samples[i],
        })
        .collect()
}

fn pretty(v: &Value) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn estimate(job: &Job) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let seed = job.settings.require_seed()?;
    let built = build(job.settings, &job.settings.ensemble, seed, 0)?;
    let est = run(job, &built, seed)?;
    let mut summary = run_meta(job, &built, &est);
    summary["config"] = json!(job.config.effective());
    summary["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    let mut files = OutputSet::new();
    match job.format {
        Format::Csv => {
            files.add(job.out.to_path_buf(), csv(&["lambda", "density", "stderr", "n_samples"], density_rows(&est)));
            files.add(summary_path(job.out), pretty(&summary)?);
        }
        Format::Json => {
            summary["rows"] = serde_json::to_value(density_json(&est))?;
            files.add(job.out.to_path_buf(), pretty(&summary)?);
        }
    }
    Ok(Outcome { files, passed: true })
}

/// Per-probe index estimates: each probe's density integrated up to the image of zero.
pub struct IndexEstimate {
    pub mean: f64,
    pub ci: (f64, f64),
    pub n_probes: usize,
}

pub fn index_estimate(
    est: &DensityEstimate,
    built: &Built,
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<IndexEstimate, CliError> {
    let zero = built.axis().forward(0.0);
    let per_probe = integrate_probe_samples(est, -1.0, zero)?;
    if per_probe.is_empty() {
        return Err(CliError::Config("every probe overflowed; no index estimate is available".into()));
    }
    let mean = per_probe.iter().sum::<f64>() / per_probe.len() as f64;
    let mut rng = stream(seed, BOOT_LANE, 0);
    let ci = bootstrap_mean_ci(&per_probe, n_boot, level, &mut rng)?;
    Ok(IndexEstimate { mean, ci, n_probes: per_probe.len() })
}

fn dense_negative_fraction(built: &Built) -> Option<f64> {
    let m = built.dense.as_ref()?;
    let eig = symmetric_eigenvalues(&m.to_nalgebra());
    Some(eig.iter().filter(|&&v| v < 0.0).count() as f64 / eig.len() as f64)
}

pub fn validate(job: &Job) -> Result<Outcome, CliError> {
    let s = job.settings;
    let start = Instant::now();
    let seed = s.require_seed()?;
    let kappa = s.require_kappa()?;
    let built = build(s, &s.ensemble, seed, 0)?;
    let est = run(job, &built, seed)?;
    let mut report = run_meta(job, &built, &est);
    report["config"] = json!(job.config.effective());

    let passed = if let Ensemble::Mixture { spec, .. } = &s.ensemble {
        let theory = ww_index(*spec);
        let idx = index_estimate(&est, &built, s.n_boot, s.ci_level, seed)?;
        let error = (idx.mean - theory).abs();
        let covered = idx.ci.0 <= theory && theory <= idx.ci.1;
        report["index"] = json!({
            "gamma": spec.gamma,
            "epsilon": spec.epsilon(),
            "alpha_theory": theory,
            "alpha_estimated": idx.mean,
            "boot_lo": idx.ci.0,
            "boot_hi": idx.ci.1,
            "abs_error": error,
            "covered": covered,
            "dense_negative_fraction": dense_negative_fraction(&built),
        });
        report["criterion"] = json!("abs_error <= max_index_error");
        error <= s.max_index_error
    } else {
        let truth = built.truth.as_ref().expect("non-mixture ensembles carry a reference spectrum");
        let smooth = smoothed_truth(truth, kappa, &est.grid)?;
        let z: Vec<f64> = (0..est.grid.len())
            .map(|i| if est.stderr[i] > 0.0 { (est.density[i] - smooth[i]) / est.stderr[i] } else { 0.0 })
            .collect();
        let max_abs_z = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let abs_err: Vec<f64> = est.density.iter().zip(&smooth).map(|(a, b)| (a - b).abs()).collect();
        let iae = integrate_curve(&est.grid, &abs_err, -1.0, 1.0)?;
        let discrete = matches!(truth, AnalyticSpectrum::Discrete { .. });
        report["max_abs_z"] = json!(max_abs_z);
        report["iae"] = json!(iae);
        report["lambda"] = json!(est.grid);
        report["density"] = json!(est.density);
        report["smoothed_truth"] = json!(smooth);
        report["z"] = json!(z);
        if discrete {
            report["criterion"] = json!("max_abs_z <= max_abs_z_limit and iae <= max_iae");
            max_abs_z <= s.max_abs_z && iae <= s.max_iae
        } else {
            report["criterion"] = json!("iae <= max_iae");
            iae <= s.max_iae
        }
    };
    report["pass"] = json!(passed);
    report["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    let mut files = OutputSet::new();
    files.add(job.out.to_path_buf(), pretty(&report)?);
    Ok(Outcome { files, passed })
}

pub fn spectrum(job: &Job) -> Result<Outcome, CliError> {
    let s = job.settings;
    let seed = match &s.ensemble {
        Ensemble::Kneser(_) | Ensemble::Diagonal(_) => s.seed.unwrap_or(0),
        _ => s.require_seed()?,
    };
    let built = build(s, &s.ensemble, seed, 0)?;
    let axis = built.axis();
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match &built.truth {
        Some(AnalyticSpectrum::Discrete { pairs }) => {
            let mut pairs = pairs.clone();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let rows = pairs
                .iter()
                .map(|&(v, m)| vec![num(axis.inverse(v)), num(v), m.to_string()])
                .collect();
            (vec!["eigenvalue", "rescaled_eigenvalue", "multiplicity"], rows)
        }
        Some(t @ AnalyticSpectrum::Continuous { law, axis: law_axis }) => {
            let grid = s.grid_values()?;
            let smooth = match s.kappa {
                Some(k) => smoothed_truth(t, k, &grid)?,
                None => vec![f64::NAN; grid.len()],
            };
            let rows = grid
                .iter()
                .zip(&smooth)
                .map(|(&l, &sm)| {
                    let d = law.density(law_axis.inverse(l)) / law_axis.scale.abs();
                    vec![num(l), num(d), num(sm)]
                })
                .collect();
            (vec!["lambda", "density", "smoothed"], rows)
        }
        None => {
            let m = built.dense.as_ref().expect("sampled ensembles keep their matrix");
            let mut eig = symmetric_eigenvalues(&m.to_nalgebra());
            eig.sort_by(|a, b| a.total_cmp(b));
            let rows = eig.iter().map(|&v| vec![num(v), num(axis.forward(v)), "1".to_string()]).collect();
            (vec!["eigenvalue", "rescaled_eigenvalue", "multiplicity"], rows)
        }
    };
    let mut files = OutputSet::new();
    match job.format {
        Format::Csv => files.add(job.out.to_path_buf(), csv(&header, rows)),
        Format::Json => {
            let table: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let obj: serde_json::Map<String, Value> = header
                        .iter()
                        .zip(r)
                        .map(|(h, c)| (h.to_string(), json!(c.parse::<f64>().unwrap_or(f64::NAN))))
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            files.add(job.out.to_path_buf(), pretty(&json!({ "rows": table }))?);
        }
    }
    Ok(Outcome { files, passed: true })
}

pub struct IndexPoint {
    pub gamma: f64,
    pub epsilon: f64,
    pub alpha_theory: f64,
    pub estimate: IndexEstimate,
    pub dense_negative_fraction: Option<f64>,
    pub overflow_count: u64,
}

/// Estimates the negative-eigenvalue fraction of one mixture sample per `gamma`.
pub fn index_points(job: &Job) -> Result<Vec<IndexPoint>, CliError> {
    let s = job.settings;
    let seed = s.require_seed()?;
    let dim = s.dim();
    if s.gammas.is_empty() {
        return Err(CliError::Config("`gammas` must list at least one value".into()));
    }
    let phi = match &s.ensemble {
        Ensemble::Mixture { spec, .. } => spec.phi,
        _ => return Err(CliError::Config("index-curve requires `ensemble = mixture`".into())),
    };
    let mut points = Vec::new();
    for (i, &gamma) in s.gammas.iter().enumerate() {
        let spec = MixtureSpec::new(gamma, phi)?;
        let run_seed = seed.wrapping_add(i as u64);
        let built = build(s, &Ensemble::Mixture { spec, dim }, seed, i as u64)?;
        let est = run_below_zero(job, &built, run_seed)?;
        let estimate = index_estimate(&est, &built, s.n_boot, s.ci_level, run_seed)?;
        points.push(IndexPoint {
            gamma,
            epsilon: spec.epsilon(),
            alpha_theory: ww_index(spec),
            estimate,
            dense_negative_fraction: dense_negative_fraction(&built),
            overflow_count: est.overflow_count,
        });
    }
    Ok(points)
}

pub fn index_curve(job: &Job) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let points = index_points(job)?;
    let header = ["gamma", "epsilon", "alpha_theory", "alpha_estimated", "boot_lo", "boot_hi"];
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                num(p.gamma),
                num(p.epsilon),
                num(p.alpha_theory),
                num(p.estimate.mean),
                num(p.estimate.ci.0),
                num(p.estimate.ci.1),
            ]
        })
        .collect();
    let details: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "gamma": p.gamma,
                "epsilon": p.epsilon,
                "alpha_theory": p.alpha_theory,
                "alpha_estimated": p.estimate.mean,
                "boot_lo": p.estimate.ci.0,
                "boot_hi": p.estimate.ci.1,
                "n_probes_used": p.estimate.n_probes,
                "dense_negative_fraction": p.dense_negative_fraction,
                "overflow_count": p.overflow_count,
            })
        })
        .collect();
    let s = job.settings;
    let mut summary = json!({
        "config": job.config.effective(),
        "kappa": s.kappa,
        "grid": grid_spec(s),
        "threads": job.threads,
        "dim": s.dim(),
        "n_probes": s.n_probes,
        "n_indices_per_probe": s.n_indices_per_probe,
        "tail_tol": s.tail_tol,
        "n_boot": s.n_boot,
        "ci_level": s.ci_level,
        "points": details,
    });
    summary["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    let mut files = OutputSet::new();
    match job.format {
        Format::Csv => {
            files.add(job.out.to_path_buf(), csv(&header, rows));
            files.add(summary_path(job.out), pretty(&summary)?);
        }
        Format::Json => files.add(job.out.to_path_buf(), pretty(&summary)?),
    }
    Ok(Outcome { files, passed: true })
}
