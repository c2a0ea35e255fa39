//! CSV formatting and all-or-nothing file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Builds CSV text from a header and rows of preformatted cells.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Files produced by one job, written together or not at all.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: PathBuf, contents: impl Into<Vec<u8>>) {
        self.files.push((path, contents.into()));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|f| f.0.as_path())
    }

    pub fn get(&self, path: &Path) -> Option<&[u8]> {
        self.files.iter().find(|f| f.0 == path).map(|f| f.1.as_slice())
    }

    /// Stages every file next to its target, then renames them into place.
    /// On failure all staged and already renamed files are removed.
    pub fn commit(self) -> Result<(), CliError> {
        let mut staged: Vec<(PathBuf, &Path)> = Vec::new();
        let mut placed: Vec<&Path> = Vec::new();
        let result = (|| -> Result<(), CliError> {
            for (path, data) in &self.files {
                let tmp = temp_name(path);
                let mut f = fs::File::create(&tmp)?;
                staged.push((tmp, path));
                f.write_all(data)?;
                f.sync_all()?;
            }
            for (tmp, path) in &staged {
                fs::rename(tmp, path)?;
                placed.push(path);
            }
            Ok(())
        })();
        if result.is_err() {
            for (tmp, _) in &staged {
                let _ = fs::remove_file(tmp);
            }
            for path in placed {
                let _ = fs::remove_file(path);
            }
        }
        result
    }
}

fn temp_name(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

/// `results.csv` → `results.summary.json`.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.summary.json"))
}
