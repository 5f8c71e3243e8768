//! CSV reports: `summary.csv`, `per_rep.csv` and `config.echo`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{BenchError, Result};
use crate::experiment::{CellSummary, RepRecord, RiskReport};

pub const SUMMARY_HEADER: &str = "model,n,gap_upper,target,r_or,se_or,r_ad,se_ad,r_eq,se_eq,reps,seed";
pub const PER_REP_HEADER: &str =
    "model,n,gap_upper,target,rep,T,m_or,r_or,m_ad,m_star_ad,r_ad,m_eq,r_eq,builds,converged";

/// Model designations contain commas, so they are always quoted.
fn quoted(s: impl std::fmt::Display) -> String {
    format!("\"{s}\"")
}

pub fn write_summary<W: Write>(rows: &[CellSummary], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for s in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            quoted(s.model),
            s.n,
            s.gap_upper,
            s.target,
            s.r_or.mean,
            s.r_or.se,
            s.r_ad.mean,
            s.r_ad.se,
            s.r_eq.mean,
            s.r_eq.se,
            s.reps,
            s.seed
        )?;
    }
    Ok(())
}

pub fn write_per_rep<W: Write>(rows: &[RepRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{PER_REP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            quoted(r.model),
            r.n,
            r.gap_upper,
            r.target,
            r.rep,
            r.horizon,
            r.m_or,
            r.r_or,
            r.m_ad,
            r.m_star_ad,
            r.r_ad,
            r.m_eq,
            r.r_eq,
            r.builds,
            r.converged
        )?;
    }
    Ok(())
}

/// Creates `dir` and writes through a buffered file, attaching the path to errors.
pub fn write_file(dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| BenchError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| BenchError::io(&path, e))?;
    Ok(path)
}

/// Writes the three report files into `dir`.
pub fn emit_report(report: &RiskReport, dir: &Path) -> Result<()> {
    write_file(dir, "summary.csv", |w| write_summary(&report.summaries, w))?;
    write_file(dir, "per_rep.csv", |w| write_per_rep(&report.records, w))?;
    write_file(dir, "config.echo", |w| w.write_all(report.config.echo().as_bytes()))?;
    Ok(())
}
