//! `pion`: run, compare and sweep spectrum-preserving optimizers from JSON
//! configs, inspect weight spectra, and run the built-in self-test.

mod inspect;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pion_core::harness::{
    comparison_csv, compare, config_parse_with_overrides, csv_write, local_std_mean, lr_sweep, summary_csv,
    write_atomic, RunConfig, RunRecord,
};
use pion_core::optim::{flop_estimate, PionConfig, UpdateMode};
use pion_core::selftest::{corrupted_exp_e2, report, run_selftest, SelftestOptions};
use pion_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_SELFTEST: u8 = 3;

/// Setting this to `exp_e2` makes the self-test use a broken exponential.
const MUTANT_ENV: &str = "PION_SELFTEST_MUTANT";
const THREADS_ENV: &str = "PION_THREADS";

#[derive(Parser)]
#[command(name = "pion", version, about = "Spectrum-preserving optimizer harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and write the metrics CSV.
    Run(RunArgs),
    /// Run several configs on the same problem and write aligned loss columns.
    Compare(CompareArgs),
    /// Grid over widths and learning rates; writes a summary CSV.
    Sweep(SweepArgs),
    /// Print singular values and diagnostics of a matrix file.
    Inspect(InspectArgs),
    /// Run the invariant suites of every module.
    Selftest,
    /// Print the per-step FLOP breakdown of one weight update as JSON.
    Flops(FlopsArgs),
}

#[derive(Args)]
struct Overrides {
    /// Override a config field after parsing, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Window for the smoothed-loss stability metric printed after the run.
    #[arg(long, value_name = "N")]
    smooth: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// Config files; repeat the flag once per run.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write one summary row per run here.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_name = "N")]
    smooth: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated widths.
    #[arg(long)]
    widths: String,
    /// Comma-separated learning rates.
    #[arg(long)]
    lrs: String,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct InspectArgs {
    /// Matrix file: first line `rows,cols`, then the values in row-major order.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct FlopsArgs {
    #[arg(long)]
    d_out: usize,
    #[arg(long)]
    d_in: usize,
    /// Tokens per batch, for the overhead relative to the layer's own cost.
    #[arg(long, default_value_t = 1024)]
    batch_tokens: usize,
    #[arg(long)]
    alternating: bool,
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: EXIT_USAGE, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(f) = configure_threads() {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Selftest => cmd_selftest(),
        Command::Flops(a) => cmd_flops(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("cannot size thread pool: {e}")))
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>, Failure> {
    raw.iter()
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_owned(), v.trim().to_owned())),
            _ => Err(usage(format!("override `{kv}` is not of the form key=value"))),
        })
        .collect()
}

fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    config_parse_with_overrides(&text, overrides).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn print_smoothed(label: &str, record: &RunRecord, window: usize) -> Result<(), Failure> {
    if window == 0 {
        return Err(usage("--smooth window must be at least 1"));
    }
    let losses: Vec<f64> = record.losses().into_iter().map(|(_, l)| l).collect();
    println!("{label} smoothed_loss_std {}", local_std_mean(&losses, window));
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let overrides = parse_overrides(&a.overrides.set)?;
    let cfg = load_config(&a.config, &overrides)?;
    match pion_core::harness::run(&cfg) {
        Ok(record) => {
            csv_write(&record, &a.out)?;
            println!(
                "final_loss {} steps {} wrote {}",
                record.summary.final_loss,
                record.summary.steps_completed,
                a.out.display()
            );
            if let Some(w) = a.smooth {
                print_smoothed("run", &record, w)?;
            }
            Ok(())
        }
        Err(Error::Divergence { step, loss, record }) => {
            csv_write(&record, &a.out)?;
            Err(Failure {
                code: EXIT_DIVERGED,
                message: format!(
                    "diverged at step {step} (loss {loss:e}); partial metrics in {}",
                    a.out.display()
                ),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_compare(a: CompareArgs) -> Result<(), Failure> {
    let overrides = parse_overrides(&a.overrides.set)?;
    let cfgs = a
        .config
        .iter()
        .map(|p| load_config(p, &overrides))
        .collect::<Result<Vec<_>, _>>()?;
    let table = compare(&cfgs)?;
    write_atomic(&a.out, &comparison_csv(&table))?;
    if let Some(path) = &a.summary {
        write_atomic(path, &summary_csv(&table.summaries))?;
    }
    for s in &table.summaries {
        println!("run {} final_loss {} diverged {}", s.config_id, s.final_loss, s.diverged);
    }
    if let Some(w) = a.smooth {
        for (i, cell) in table.cells.iter().enumerate() {
            print_smoothed(&format!("run {i}"), &cell.record, w)?;
        }
    }
    let diverged: Vec<usize> = table.summaries.iter().filter(|s| s.diverged).map(|s| s.config_id).collect();
    if diverged.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_DIVERGED, message: format!("runs {diverged:?} diverged") })
    }
}

fn parse_list<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<Vec<T>, Failure> {
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(usage(format!("--{flag} needs at least one value")));
    }
    items
        .iter()
        .map(|s| s.parse().map_err(|_| usage(format!("--{flag}: cannot parse `{s}`"))))
        .collect()
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let widths: Vec<usize> = parse_list("widths", &a.widths)?;
    let lrs: Vec<f64> = parse_list("lrs", &a.lrs)?;
    let overrides = parse_overrides(&a.overrides.set)?;
    let base = load_config(&a.config, &overrides)?;
    let grid = lr_sweep(&widths, &lrs, &base)?;
    write_atomic(&a.out, &summary_csv(&grid.summaries))?;
    for (w, best) in grid.widths.iter().zip(&grid.argmin_lr) {
        match best {
            Some(lr) => println!("width {w} best_lr {lr}"),
            None => println!("width {w} best_lr none"),
        }
    }
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.input).map_err(|e| usage(format!("cannot read {}: {e}", a.input.display())))?;
    let m = inspect::parse_matrix(&text).map_err(|e| usage(format!("{}: {e}", a.input.display())))?;
    print!("{}", inspect::report(&m)?);
    Ok(())
}

fn cmd_selftest() -> Result<(), Failure> {
    let opts = match std::env::var(MUTANT_ENV).as_deref() {
        Ok("exp_e2") => SelftestOptions { exp_e2: corrupted_exp_e2 },
        Ok(other) => return Err(usage(format!("{MUTANT_ENV}: unknown mutant `{other}`"))),
        Err(_) => SelftestOptions::default(),
    };
    let results = run_selftest(&opts);
    print!("{}", report(&results));
    let failed = results.iter().filter(|r| !r.passed()).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure { code: EXIT_SELFTEST, message: format!("{failed} suite(s) failed") })
    }
}

fn cmd_flops(a: FlopsArgs) -> Result<(), Failure> {
    if a.d_out == 0 || a.d_in == 0 || a.batch_tokens == 0 {
        return Err(usage("dimensions and batch size must be positive"));
    }
    let cfg = PionConfig {
        update_mode: if a.alternating { UpdateMode::Alternating(1) } else { UpdateMode::Bilateral },
        ..Default::default()
    };
    let f = flop_estimate(a.d_out, a.d_in, a.batch_tokens, &cfg);
    println!("{}", serde_json::to_string_pretty(&f).expect("flop breakdown serializes"));
    Ok(())
}
