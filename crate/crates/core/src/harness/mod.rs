//! Experiment runner: steps an optimizer on a problem, records diagnostics,
//! runs comparisons and learning-rate sweeps, and writes CSV.

mod config;
mod csv;
mod run;
mod sweep;

pub use config::{
    config_parse, config_parse_with_overrides, LeastSquaresSpec, LrSchedule, MlpSpec, OptimizerSpec, ProblemSpec,
    ProcrustesSpec, RunConfig,
};
pub use csv::{
    comparison_csv, csv_write, fmt_f64, metrics_csv, summary_csv, write_atomic, METRICS_HEADER, SUMMARY_HEADER,
};
pub use run::{run, run_with_problem, MetricRow, RunRecord, RunSummary, DIVERGENCE_LOSS};
pub use sweep::{compare, local_std_mean, lr_sweep, moving_average, CellResult, ComparisonTable, SummaryRow, SweepGrid};
