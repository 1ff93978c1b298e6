//! CSV emission and parsing for benchmark results: a per-replicate file and a
//! summary file. Floats are written in shortest round-trip form, so parsing a
//! file back reproduces the in-memory values bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::runner::{mse_of, CellResult, ReplicateOutcome};

pub const REPLICATE_HEADER: &str =
    "env_id,design_id,replicate,ate_hat,ci_lo,ci_hi,covered,true_ate";
pub const SUMMARY_HEADER: &str = "env_id,design_id,mse,rmse,coverage,n,T,R,seed";

/// Suffix marking the variant estimator that keeps the burn-in days' psi
/// terms in the average.
pub const BURN_IN_SUFFIX: &str = "_with_burn_in";

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

/// One logical result row set: the cell's main replicates plus, for adaptive
/// designs, the burn-in-variant replicates under a suffixed design id.
fn row_groups(cell: &CellResult) -> Vec<(String, &[ReplicateOutcome])> {
    let mut groups = vec![(cell.design_id.clone(), cell.replicates.as_slice())];
    if let Some(variant) = &cell.with_burn_in {
        groups.push((format!("{}{BURN_IN_SUFFIX}", cell.design_id), variant.as_slice()));
    }
    groups
}

pub fn render_replicates(results: &[CellResult]) -> String {
    let mut out = String::from(REPLICATE_HEADER);
    out.push('\n');
    for cell in results {
        for (design_id, rows) in row_groups(cell) {
            for (i, r) in rows.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    cell.env_id, design_id, i, r.ate_hat, r.ci_lo, r.ci_hi, r.covered, cell.true_ate
                );
            }
        }
    }
    out
}

pub fn render_summary(results: &[CellResult]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for cell in results {
        for (design_id, rows) in row_groups(cell) {
            let mse = mse_of(rows, cell.true_ate);
            let rmse = mse / (cell.true_ate * cell.true_ate);
            let coverage =
                rows.iter().filter(|r| r.covered).count() as f64 / rows.len() as f64;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                cell.env_id, design_id, mse, rmse, coverage, cell.n, cell.horizon,
                rows.len(), cell.seed
            );
        }
    }
    out
}

/// Write `replicates.csv` and `summary.csv` under `dir`, creating it if
/// needed; returns the two paths.
pub fn emit_csv(results: &[CellResult], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rep_path = dir.join("replicates.csv");
    let sum_path = dir.join("summary.csv");
    std::fs::write(&rep_path, render_replicates(results)).map_err(io_err(&rep_path))?;
    std::fs::write(&sum_path, render_summary(results)).map_err(io_err(&sum_path))?;
    Ok((rep_path, sum_path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRow {
    pub env_id: String,
    pub design_id: String,
    pub replicate: usize,
    pub ate_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub covered: bool,
    pub true_ate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub env_id: String,
    pub design_id: String,
    pub mse: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub n: usize,
    pub horizon: usize,
    pub replicates: usize,
    pub seed: u64,
}

fn fields<'a>(line: &'a str, want: usize, what: &str) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split(',').collect();
    if parts.len() != want {
        return Err(Error::domain(format!(
            "{what} row has {} fields, expected {want}: '{line}'",
            parts.len()
        )));
    }
    Ok(parts)
}

fn parse<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::domain(format!("cannot parse '{raw}' in {what} row")))
}

pub fn parse_replicates(text: &str) -> Result<Vec<ReplicateRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == REPLICATE_HEADER => {}
        other => return Err(Error::domain(format!("bad replicate header: {other:?}"))),
    }
    lines
        .map(|line| {
            let f = fields(line, 8, "replicate")?;
            Ok(ReplicateRow {
                env_id: f[0].to_string(),
                design_id: f[1].to_string(),
                replicate: parse(f[2], "replicate")?,
                ate_hat: parse(f[3], "replicate")?,
                ci_lo: parse(f[4], "replicate")?,
                ci_hi: parse(f[5], "replicate")?,
                covered: parse(f[6], "replicate")?,
                true_ate: parse(f[7], "replicate")?,
            })
        })
        .collect()
}

pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SUMMARY_HEADER => {}
        other => return Err(Error::domain(format!("bad summary header: {other:?}"))),
    }
    lines
        .map(|line| {
            let f = fields(line, 9, "summary")?;
            Ok(SummaryRow {
                env_id: f[0].to_string(),
                design_id: f[1].to_string(),
                mse: parse(f[2], "summary")?,
                rmse: parse(f[3], "summary")?,
                coverage: parse(f[4], "summary")?,
                n: parse(f[5], "summary")?,
                horizon: parse(f[6], "summary")?,
                replicates: parse(f[7], "summary")?,
                seed: parse(f[8], "summary")?,
            })
        })
        .collect()
}
