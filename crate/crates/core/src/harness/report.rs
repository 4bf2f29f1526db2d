use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::sweep::{CellStatus, ResultRow, SweepKind};

pub const CSV_HEADER: &str =
    "snr_db,xi_i,xi_o,mse_sim,mse_theory,ber_sim,ber_theory_avg,ber_bound,trials,bit_errors,elapsed_s";

/// Shortest round-trip scientific form; `NaN` for missing values.
fn sci(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            sci(r.snr_db),
            sci(r.xi_i),
            sci(r.xi_o),
            sci(r.mse_sim),
            sci(r.mse_theory),
            sci(r.ber_sim),
            sci(r.ber_theory_avg),
            sci(r.ber_bound),
            r.trials,
            r.bit_errors,
            sci(r.elapsed_s)
        );
    }
    out
}

/// Parses a CSV written by [`to_csv`]. Status is not stored and comes back as
/// `Ok`.
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Input(format!("unexpected CSV header {other:?}"))),
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 11 {
                return Err(Error::Input(format!("row {}: expected 11 fields, got {}", i + 1, fields.len())));
            }
            let f = |k: usize| {
                fields[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Input(format!("row {}, field {}: {e}", i + 1, k + 1)))
            };
            let u = |k: usize| {
                fields[k]
                    .parse::<u64>()
                    .map_err(|e| Error::Input(format!("row {}, field {}: {e}", i + 1, k + 1)))
            };
            Ok(ResultRow {
                snr_db: f(0)?,
                xi_i: f(1)?,
                xi_o: f(2)?,
                mse_sim: f(3)?,
                mse_theory: f(4)?,
                ber_sim: f(5)?,
                ber_theory_avg: f(6)?,
                ber_bound: f(7)?,
                trials: u(8)? as usize,
                bit_errors: u(9)?,
                elapsed_s: f(10)?,
                status: CellStatus::Ok,
            })
        })
        .collect()
}

fn status_label(s: &CellStatus) -> String {
    match s {
        CellStatus::Ok => "ok".into(),
        CellStatus::NotConverged => "NOT CONVERGED".into(),
        CellStatus::Failed(m) => format!("FAILED: {m}"),
    }
}

/// Fixed-width text table of a sweep.
pub fn summary_table(kind: SweepKind, rows: &[ResultRow]) -> String {
    let mut out = String::new();
    match kind {
        SweepKind::Mse => {
            let _ = writeln!(
                out,
                "{:>7} {:>6} {:>6} {:>12} {:>12} {:>8} {:>8}  status",
                "snr_db", "xi_i", "xi_o", "mse_sim", "mse_theory", "rel_err", "trials"
            );
            for r in rows {
                let rel = (r.mse_sim - r.mse_theory) / r.mse_theory;
                let _ = writeln!(
                    out,
                    "{:>7.2} {:>6.3} {:>6.3} {:>12.4e} {:>12.4e} {:>+8.3} {:>8}  {}",
                    r.snr_db,
                    r.xi_i,
                    r.xi_o,
                    r.mse_sim,
                    r.mse_theory,
                    rel,
                    r.trials,
                    status_label(&r.status)
                );
            }
        }
        SweepKind::Ber => {
            let _ = writeln!(
                out,
                "{:>7} {:>6} {:>6} {:>12} {:>12} {:>12} {:>12} {:>8} {:>10}  status",
                "snr_db", "xi_i", "xi_o", "mse_sim", "ber_sim", "ber_avg", "ber_bound", "frames", "errors"
            );
            for r in rows {
                let _ = writeln!(
                    out,
                    "{:>7.2} {:>6.3} {:>6.3} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>8} {:>10}  {}",
                    r.snr_db,
                    r.xi_i,
                    r.xi_o,
                    r.mse_sim,
                    r.ber_sim,
                    r.ber_theory_avg,
                    r.ber_bound,
                    r.trials,
                    r.bit_errors,
                    status_label(&r.status)
                );
            }
        }
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<kind>.csv` and `<kind>_summary.txt` into `dir`.
pub fn emit_results(dir: &Path, kind: SweepKind, rows: &[ResultRow]) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::Input("no result rows to write".into()));
    }
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv = dir.join(format!("{}.csv", kind.name()));
    let txt = dir.join(format!("{}_summary.txt", kind.name()));
    write_file(&csv, &to_csv(rows))?;
    write_file(&txt, &summary_table(kind, rows))?;
    Ok(vec![csv, txt])
}
