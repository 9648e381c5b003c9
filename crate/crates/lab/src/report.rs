use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::LabError;

/// Version tag written in the first line of every CSV.
pub const CSV_SCHEMA: &str = "duality-lab-csv/1";
pub const CSV_COLUMNS: &str = "experiment,config_hash,seed,check,case,value,residual,tolerance,passed";

/// One measured check.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub check: String,
    pub case: String,
    /// The measured quantity itself.
    pub value: f64,
    /// Distance from the contract, in the units the tolerance is stated in.
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Row {
    pub fn new(check: &str, case: impl Into<String>, value: f64, residual: f64, tolerance: f64, passed: bool) -> Self {
        Row {
            check: check.to_string(),
            case: case.into(),
            value,
            residual,
            tolerance,
            passed,
        }
    }

    /// Passes when `residual <= tolerance`.
    pub fn within(check: &str, case: impl Into<String>, value: f64, residual: f64, tolerance: f64) -> Self {
        Self::new(check, case, value, residual, tolerance, residual <= tolerance)
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV body; depends only on its inputs.
pub fn render_csv(experiment: &str, hash: &str, seed: u64, rows: &[Row]) -> String {
    let mut out = String::new();
    writeln!(out, "# schema={CSV_SCHEMA}").unwrap();
    writeln!(out, "{CSV_COLUMNS}").unwrap();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:e},{:e},{:e},{}",
            field(experiment),
            hash,
            seed,
            field(&r.check),
            field(&r.case),
            r.value,
            r.residual,
            r.tolerance,
            r.passed
        )
        .unwrap();
    }
    out
}

pub struct ManifestInfo<'a> {
    pub experiment: &'a str,
    pub config_path: &'a Path,
    pub hash: &'a str,
    pub seed: u64,
    pub started_unix: u64,
    pub wall_clock_s: f64,
}

pub fn render_manifest(info: &ManifestInfo<'_>, rows: &[Row]) -> String {
    let passed = rows.iter().filter(|r| r.passed).count();
    let mut out = String::new();
    writeln!(out, "# Run manifest: {}\n", info.experiment).unwrap();
    writeln!(out, "- config: `{}`", info.config_path.display()).unwrap();
    writeln!(out, "- config hash: `{}`", info.hash).unwrap();
    writeln!(out, "- artifact version: {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(out, "- seed: {}", info.seed).unwrap();
    writeln!(out, "- started (unix seconds): {}", info.started_unix).unwrap();
    writeln!(out, "- wall clock: {:.3} s", info.wall_clock_s).unwrap();
    writeln!(
        out,
        "- status: {} ({passed}/{} checks passed)\n",
        if passed == rows.len() { "PASS" } else { "FAIL" },
        rows.len()
    )
    .unwrap();
    writeln!(out, "| check | case | value | residual | tolerance | passed |").unwrap();
    writeln!(out, "|---|---|---|---|---|---|").unwrap();
    for r in rows {
        writeln!(
            out,
            "| {} | {} | {:e} | {:e} | {:e} | {} |",
            r.check, r.case, r.value, r.residual, r.tolerance, r.passed
        )
        .unwrap();
    }
    out
}

/// Writes `results.csv` and `manifest.md` under `dir`, each through a
/// temporary file and a rename.
pub fn write_outputs(dir: &Path, csv: &str, manifest: &str) -> Result<(PathBuf, PathBuf), LabError> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let csv_path = dir.join("results.csv");
    let md_path = dir.join("manifest.md");
    for (path, body) in [(&csv_path, csv), (&md_path, manifest)] {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, body).map_err(|e| LabError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| LabError::io(path, e))?;
    }
    Ok((csv_path, md_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_commas() {
        let rows = vec![Row::within("gap", "log, x=1", 0.5, 1e-9, 1e-5)];
        let csv = render_csv("finite-duality", "abc", 7, &rows);
        assert_eq!(csv.lines().nth(2).unwrap(), "finite-duality,abc,7,gap,\"log, x=1\",5e-1,1e-9,1e-5,true");
    }
}
