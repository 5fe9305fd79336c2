//! CSV output. Floats carry 17 significant digits; lines end in LF.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use super::run::RunRecord;
use super::sweep::{ComparisonTable, SummaryRow};
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "step,loss,param_id,update_fro_over_eta,spectrum_drift,stationarity,weight_fro,alpha";
pub const SUMMARY_HEADER: &str = "config_id,width,lr,final_loss,min_stationarity,max_drift,diverged";

/// `{:.16e}`: one leading digit plus sixteen decimals.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn metrics_csv(record: &RunRecord) -> String {
    let mut out = String::with_capacity(64 * (record.rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in &record.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.step,
            fmt_f64(r.loss),
            r.param_id,
            fmt_f64(r.update_fro_over_eta),
            fmt_f64(r.spectrum_drift),
            fmt_f64(r.stationarity),
            fmt_f64(r.weight_fro),
            fmt_f64(r.alpha),
        );
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.config_id,
            r.width,
            fmt_f64(r.lr),
            fmt_f64(r.final_loss),
            fmt_f64(r.min_stationarity),
            fmt_f64(r.max_drift),
            r.diverged,
        );
    }
    out
}

/// `step,loss_0,loss_1,…`; steps missing from a run (it diverged earlier)
/// are left empty.
pub fn comparison_csv(table: &ComparisonTable) -> String {
    let mut out = String::from("step");
    for k in 0..table.losses.len() {
        let _ = write!(out, ",loss_{k}");
    }
    out.push('\n');
    for (i, step) in table.steps.iter().enumerate() {
        let _ = write!(out, "{step}");
        for col in &table.losses {
            match col[i] {
                Some(v) => {
                    let _ = write!(out, ",{}", fmt_f64(v));
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn csv_write(record: &RunRecord, path: &Path) -> Result<()> {
    write_atomic(path, &metrics_csv(record))
}
