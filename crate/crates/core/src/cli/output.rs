//! Result files: a CSV table for plotting and a JSON summary carrying the
//! resolved configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::Format;
use super::sweep::SweepResult;
use crate::analysis::AuditRow;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "swept_param,value,mc_estimate,mc_ci95,analytic,trials";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// The CSV table. Lines end in LF, numbers use `.` and round-trip exactly;
/// timings are deliberately absent so reruns compare byte for byte.
pub fn csv_table(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        let _ = writeln!(
            out,
            "{},{:e},{},{},{},{}",
            result.parameter,
            row.value,
            opt(row.mc.map(|m| m.point_estimate)),
            opt(row.mc.map(|m| m.half_width_95)),
            opt(row.analytic),
            row.trials
        );
    }
    out
}

pub fn json_summary(result: &SweepResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result).map_err(|e| Error::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_json_summary(text: &str) -> Result<SweepResult> {
    serde_json::from_str(text).map_err(|e| Error::Serialize(e.to_string()))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Write `<dir>/<name>.<ext>` for each requested format and return the paths.
pub fn emit_results(result: &SweepResult, dir: &Path, name: &str, formats: &[Format]) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::with_capacity(formats.len());
    for format in formats {
        let (ext, body) = match format {
            Format::Csv => ("csv", csv_table(result)),
            Format::Json => ("json", json_summary(result)?),
        };
        let path = dir.join(format!("{name}.{ext}"));
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

pub const AUDIT_HEADER: &str = "h,m,mu,snr,pairwise_approx,pairwise_mc,pairwise_se,\
conditional_approx,conditional_mc,conditional_se,linearization_ok,independence_ok";

pub fn audit_table(rows: &[AuditRow]) -> String {
    let mut out = String::new();
    out.push_str(AUDIT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            r.h,
            r.m,
            r.mu,
            r.snr,
            r.pairwise_approx,
            r.pairwise_mc,
            r.pairwise_se,
            r.conditional_approx,
            r.conditional_mc,
            r.conditional_se,
            r.linearization_ok,
            r.independence_ok
        );
    }
    out
}
