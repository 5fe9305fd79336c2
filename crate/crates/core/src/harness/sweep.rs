use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::run::{run, RunRecord};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub config_id: usize,
    pub width: usize,
    pub lr: f64,
    pub final_loss: f64,
    pub min_stationarity: f64,
    pub max_drift: f64,
    pub diverged: bool,
}

/// Outcome of one run inside a comparison or sweep; diverged runs keep the
/// rows recorded before failure.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub record: RunRecord,
    pub diverged: bool,
}

fn run_cell(cfg: &RunConfig) -> Result<CellResult> {
    match run(cfg) {
        Ok(record) => Ok(CellResult { record, diverged: false }),
        Err(Error::Divergence { record, .. }) => Ok(CellResult {
            record: *record,
            diverged: true,
        }),
        Err(e) => Err(e),
    }
}

fn summarize(config_id: usize, cfg: &RunConfig, cell: &CellResult) -> SummaryRow {
    let s = &cell.record.summary;
    SummaryRow {
        config_id,
        width: cfg.problem.width(),
        lr: cfg.optimizer.lr(),
        final_loss: s.final_loss,
        min_stationarity: s.min_stationarity,
        max_drift: s.max_drift,
        diverged: cell.diverged,
    }
}

/// Per-step losses of several optimizers on one problem, aligned by step.
#[derive(Clone, Debug)]
pub struct ComparisonTable {
    pub steps: Vec<usize>,
    /// One column per config; `None` where that run has no recorded row.
    pub losses: Vec<Vec<Option<f64>>>,
    pub summaries: Vec<SummaryRow>,
    pub cells: Vec<CellResult>,
}

pub fn compare(cfgs: &[RunConfig]) -> Result<ComparisonTable> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::Config("compare needs at least one config".into()))?;
    if let Some(bad) = cfgs
        .iter()
        .position(|c| c.problem != first.problem || c.seed != first.seed)
    {
        return Err(Error::Config(format!(
            "config {bad} uses a different problem or seed than config 0"
        )));
    }
    let cells = cfgs.par_iter().map(run_cell).collect::<Result<Vec<_>>>()?;

    let mut steps: Vec<usize> = cells
        .iter()
        .flat_map(|c| c.record.losses().into_iter().map(|(s, _)| s))
        .collect();
    steps.sort_unstable();
    steps.dedup();
    let losses = cells
        .iter()
        .map(|c| {
            let by_step = c.record.losses();
            steps
                .iter()
                .map(|s| by_step.iter().find(|(t, _)| t == s).map(|&(_, l)| l))
                .collect()
        })
        .collect();
    let summaries = cfgs
        .iter()
        .zip(&cells)
        .enumerate()
        .map(|(i, (cfg, cell))| summarize(i, cfg, cell))
        .collect();
    Ok(ComparisonTable {
        steps,
        losses,
        summaries,
        cells,
    })
}

#[derive(Clone, Debug)]
pub struct SweepGrid {
    pub widths: Vec<usize>,
    pub lrs: Vec<f64>,
    /// `final_losses[w][l]` for `widths[w]`, `lrs[l]`; `NaN` when diverged.
    pub final_losses: Vec<Vec<f64>>,
    /// Best learning rate per width, `None` if every cell diverged.
    pub argmin_lr: Vec<Option<f64>>,
    pub summaries: Vec<SummaryRow>,
}

/// Runs `base` for every (width, lr) pair, resizing the problem with
/// [`ProblemSpec::with_width`](super::ProblemSpec::with_width). Cells run
/// on the current rayon pool.
pub fn lr_sweep(widths: &[usize], lrs: &[f64], base: &RunConfig) -> Result<SweepGrid> {
    if widths.is_empty() || lrs.is_empty() {
        return Err(Error::Config("lr_sweep needs at least one width and one lr".into()));
    }
    let cfgs: Vec<RunConfig> = widths
        .iter()
        .flat_map(|&w| {
            lrs.iter().map(move |&lr| RunConfig {
                problem: base.problem.with_width(w),
                optimizer: base.optimizer.with_lr(lr),
                ..base.clone()
            })
        })
        .collect();
    let cells = cfgs.par_iter().map(run_cell).collect::<Result<Vec<_>>>()?;

    let summaries: Vec<SummaryRow> = cfgs
        .iter()
        .zip(&cells)
        .enumerate()
        .map(|(i, (cfg, cell))| summarize(i, cfg, cell))
        .collect();
    let final_losses: Vec<Vec<f64>> = summaries
        .chunks(lrs.len())
        .map(|row| row.iter().map(|s| if s.diverged { f64::NAN } else { s.final_loss }).collect())
        .collect();
    let argmin_lr = final_losses
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, l)| l.is_finite())
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| lrs[i])
        })
        .collect();
    Ok(SweepGrid {
        widths: widths.to_vec(),
        lrs: lrs.to_vec(),
        final_losses,
        argmin_lr,
        summaries,
    })
}

/// Trailing moving average with window `window` (shorter at the start).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, &v) in values.iter().enumerate() {
        acc += v;
        if i >= window {
            acc -= values[i - window];
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}

/// Mean over full windows of the standard deviation within each window;
/// a roughness score for a loss trajectory.
pub fn local_std_mean(values: &[f64], window: usize) -> f64 {
    let window = window.max(2);
    if values.len() < window {
        return 0.0;
    }
    let stds: Vec<f64> = values
        .windows(window)
        .map(|w| {
            let mean = w.iter().sum::<f64>() / window as f64;
            (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / window as f64).sqrt()
        })
        .collect();
    stds.iter().sum::<f64>() / stds.len() as f64
}
