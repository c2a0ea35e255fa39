//! Flat `key = value` configuration with command-line overrides.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Every recognized key is listed in [`KEYS`] with its default. An empty
//! default means the key is unset unless given.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// `(key, default, description)`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("ensemble", "kneser", "operator source: kneser | wigner | wishart | mixture | diagonal"),
    ("kneser_n", "15", "Kneser graph set size n"),
    ("kneser_k", "7", "Kneser graph subset size k"),
    ("dim", "1024", "matrix dimension D for wigner, wishart and mixture"),
    ("phi", "0.5", "aspect ratio D/N for wishart and mixture"),
    ("sigma2", "1.0", "per-entry variance scale of the wishart factor"),
    ("gamma", "0.5", "wigner weight of a single mixture"),
    ("gammas", "0,0.2,0.4,0.6,0.8,0.96", "comma-separated mixture weights for index-curve"),
    ("diagonal", "", "comma-separated eigenvalues for the diagonal ensemble"),
    ("noise", "none", "matvec noise: none | additive | multiplicative"),
    ("noise_multiple", "1.0", "noise variance is noise_multiple / D^2"),
    ("shift", "none", "pre-rescaling shift: none | mp (maps the Marchenko-Pastur support onto [-1, 1])"),
    ("norm_bound", "auto", "operator norm source: auto | power | exact"),
    ("norm_iterations", "100", "power iterations for the norm estimate"),
    ("margin", "0.05", "relative margin added to the norm bound before rescaling"),
    ("kappa", "", "von Mises smoothing parameter (required for estimate, validate, index-curve)"),
    ("grid", "chebyshev", "query grid: chebyshev | uniform"),
    ("grid_points", "200", "number of query points"),
    ("n_probes", "100", "random probe vectors"),
    ("n_indices_per_probe", "1000", "polynomial orders sampled per probe"),
    ("mode", "faithful", "faithful (per-point sampling) | shared (per-probe moments)"),
    ("tail_tol", "1e-12", "bound on the discarded coefficient tail"),
    ("probe", "gaussian", "probe distribution: gaussian | rademacher"),
    ("control_variate", "none", "none | identity | diagonal_reuse"),
    ("cv_alpha", "1.0", "scale of the identity control variate"),
    ("cv_c", "1.0", "weight c of the identity control variate"),
    ("cv_batch", "10", "probe batch size for diagonal_reuse"),
    ("seed", "", "RNG seed (required for estimate, validate, index-curve)"),
    ("memory_budget_mb", "4096", "memory budget for operator construction"),
    ("n_boot", "1000", "bootstrap resamples"),
    ("ci_level", "0.95", "bootstrap interval level"),
    ("max_abs_z", "4.0", "validate: largest allowed pointwise |z| (discrete spectra)"),
    ("max_iae", "0.05", "validate: largest allowed integrated absolute error"),
    ("max_index_error", "0.05", "validate (mixture): largest allowed |alpha_estimated - alpha_theory|"),
];

/// Raw key-value settings with defaults applied lazily.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|k| k.0 == key) {
        Ok(())
    } else {
        Err(CliError::Config(format!("unknown key `{key}`")))
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            known(k).map_err(|e| CliError::Config(format!("line {}: {e}", n + 1)))?;
            if values.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides on top of the file settings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        known(key)?;
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        match self.values.get(key) {
            Some(v) => Some(v.as_str()),
            None => KEYS.iter().find(|k| k.0 == key).map(|k| k.1).filter(|d| !d.is_empty()),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.get(key)?.ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let Some(v) = self.raw(key) else { return Ok(Vec::new()) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| CliError::Config(format!("invalid number `{s}` in `{key}`"))))
            .collect()
    }

    /// Every key with its effective value, for echoing into summaries.
    pub fn effective(&self) -> BTreeMap<String, String> {
        KEYS.iter().filter_map(|k| self.raw(k.0).map(|v| (k.0.to_string(), v.to_string()))).collect()
    }
}

/// Text listing every key, its default and meaning.
pub fn describe_keys() -> String {
    let mut out = String::new();
    for (k, d, doc) in KEYS {
        let d = if d.is_empty() { "(unset)" } else { d };
        out.push_str(&format!("{k:<22} {d:<24} {doc}\n"));
    }
    out
}
