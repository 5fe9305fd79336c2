use pion_core::harness::{
    comparison_csv, compare, config_parse, config_parse_with_overrides, csv_write, lr_sweep, metrics_csv, run,
    run_with_problem, summary_csv, LeastSquaresSpec, LrSchedule, MlpSpec, OptimizerSpec, ProblemSpec, RunConfig,
    METRICS_HEADER,
};
use pion_core::optim::{AdamWHyper, ExpScheme, MuonLiteHyper, PionConfig, SgdHyper, UpdateMode};
use pion_core::problems::{least_squares, LeastSquares, Problem};
use pion_core::random::{orthogonal, prng};
use pion_core::{Error, Matrix, Result};

fn ls_cfg(optimizer: OptimizerSpec, steps: usize) -> RunConfig {
    RunConfig {
        problem: ProblemSpec::LeastSquares(LeastSquaresSpec { d_out: 6, d_in: 8, n_samples: 16 }),
        optimizer,
        steps,
        record_every: 10,
        lr_schedule: LrSchedule::Constant,
        seed: 5,
    }
}

fn pion(cfg: PionConfig) -> OptimizerSpec {
    OptimizerSpec::Pion(cfg)
}

#[test]
fn identical_configs_give_identical_csv() {
    let cfg = ls_cfg(pion(PionConfig { lr: 1e-2, ..Default::default() }), 100);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.activation_norms, b.activation_norms);
    assert_eq!(metrics_csv(&a), metrics_csv(&b));
    let other = run(&RunConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(metrics_csv(&a), metrics_csv(&other));
}

#[test]
fn records_baseline_cadence_and_final_step() {
    let one = run(&ls_cfg(pion(PionConfig::default()), 1)).unwrap();
    assert_eq!(one.rows.iter().map(|r| r.step).collect::<Vec<_>>(), [0, 1]);

    let rec = run(&ls_cfg(pion(PionConfig::default()), 25)).unwrap();
    assert_eq!(rec.rows.iter().map(|r| r.step).collect::<Vec<_>>(), [0, 10, 20, 25]);
    assert!(rec.rows.windows(2).all(|p| p[0].step < p[1].step));
    assert!(rec.rows.iter().all(|r| r.loss.is_finite() && r.stationarity.is_finite()));
    assert_eq!(rec.summary.steps_completed, 25);
    assert_eq!(rec.summary.final_loss, rec.rows.last().unwrap().loss);
}

struct Flat;

impl Problem for Flat {
    fn name(&self) -> &str {
        "flat"
    }
    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![(3, 2)]
    }
    fn initial_params(&self) -> Vec<Matrix> {
        vec![Matrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 1.5)]
    }
    fn loss(&self, _: &[Matrix]) -> Result<f64> {
        Ok(7.0)
    }
    fn gradients(&self, params: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(vec![Matrix::zeros(params[0].rows(), params[0].cols())])
    }
}

#[test]
fn zero_gradient_keeps_loss_constant() {
    for opt in [
        pion(PionConfig::default()),
        pion(PionConfig::transported()),
        OptimizerSpec::Sgd(SgdHyper::default()),
        OptimizerSpec::Adamw(AdamWHyper::default()),
        OptimizerSpec::MuonLite(MuonLiteHyper::default()),
    ] {
        let rec = run_with_problem(&ls_cfg(opt, 30), &Flat).unwrap();
        assert!(rec.rows.iter().all(|r| r.loss == 7.0));
        assert!(rec.rows.iter().all(|r| r.update_fro_over_eta == 0.0));
    }
}

/// Pushed along a constant gradient; the loss turns NaN once the first
/// entry passes 1.
struct Cliff;

impl Problem for Cliff {
    fn name(&self) -> &str {
        "cliff"
    }
    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![(2, 2)]
    }
    fn initial_params(&self) -> Vec<Matrix> {
        vec![Matrix::zeros(2, 2)]
    }
    fn loss(&self, params: &[Matrix]) -> Result<f64> {
        let x = params[0].get(0, 0);
        Ok(if x > 1.0 { f64::NAN } else { -x })
    }
    fn gradients(&self, _: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(vec![Matrix::from_rows(&[&[-1.0, 0.0], &[0.0, 0.0]])])
    }
}

#[test]
fn nan_loss_reports_divergence_with_prior_rows() {
    let cfg = RunConfig {
        record_every: 1,
        ..ls_cfg(OptimizerSpec::Sgd(SgdHyper { lr: 0.15, momentum: 0.0 }), 100)
    };
    match run_with_problem(&cfg, &Cliff) {
        Err(Error::Divergence { step, loss, record }) => {
            assert_eq!(step, 7);
            assert!(loss.is_nan());
            assert_eq!(record.rows.iter().map(|r| r.step).collect::<Vec<_>>(), (0..7).collect::<Vec<_>>());
            let csv = metrics_csv(&record);
            assert_eq!(csv.lines().count(), 8);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn absurd_learning_rate_diverges() {
    let cfg = ls_cfg(pion(PionConfig { lr: 1e9, ..Default::default() }), 50);
    assert!(matches!(run(&cfg), Err(Error::Divergence { .. })));
}

#[test]
fn cayley_runs_record_negligible_drift() {
    for mode in [UpdateMode::Bilateral, UpdateMode::Alternating(3)] {
        let cfg = RunConfig {
            record_every: 1,
            ..ls_cfg(pion(PionConfig { exp_scheme: ExpScheme::Cayley, update_mode: mode, lr: 1e-2, ..Default::default() }), 200)
        };
        let rec = run(&cfg).unwrap();
        assert!(rec.rows.iter().all(|r| r.spectrum_drift <= 1e-10), "{mode:?}");
    }
}

#[test]
fn single_config_comparison_matches_run() {
    let cfg = ls_cfg(pion(PionConfig::default()), 40);
    let table = compare(std::slice::from_ref(&cfg)).unwrap();
    let rec = run(&cfg).unwrap();
    assert_eq!(table.losses.len(), 1);
    let want: Vec<Option<f64>> = rec.losses().into_iter().map(|(_, l)| Some(l)).collect();
    assert_eq!(table.losses[0], want);
    assert_eq!(table.steps, rec.rows.iter().map(|r| r.step).collect::<Vec<_>>());
}

#[test]
fn bilateral_and_alternating_on_mlp_are_finite() {
    let base = RunConfig {
        problem: ProblemSpec::Mlp(MlpSpec { widths: vec![8], depth: 3, n_samples: 16 }),
        optimizer: pion(PionConfig::default()),
        steps: 50,
        record_every: 10,
        lr_schedule: LrSchedule::Cosine { floor_fraction: LrSchedule::DEFAULT_FLOOR },
        seed: 1,
    };
    let alt = RunConfig {
        optimizer: pion(PionConfig { update_mode: UpdateMode::Alternating(1), ..Default::default() }),
        ..base.clone()
    };
    let table = compare(&[base, alt]).unwrap();
    assert_eq!(table.losses.len(), 2);
    assert!(table.losses.iter().flatten().all(|l| l.is_some_and(f64::is_finite)));
    let csv = comparison_csv(&table);
    assert!(csv.starts_with("step,loss_0,loss_1\n"));
    assert_eq!(table.cells[0].record.activation_norms.len(), table.steps.len());
    assert_eq!(table.cells[0].record.activation_norms[0].1.len(), 3);
}

#[test]
fn comparison_rejects_different_problems() {
    let a = ls_cfg(pion(PionConfig::default()), 5);
    let b = RunConfig { seed: 99, ..a.clone() };
    assert!(matches!(compare(&[a, b]), Err(Error::Config(_))));
}

/// Least squares whose targets come from a point on the initial weight's
/// isospectral manifold, so a spectrum-preserving optimizer can reach zero.
fn realizable(d_out: usize, d_in: usize, n: usize, seed: u64) -> LeastSquares {
    let base = least_squares(d_out, d_in, n, seed);
    let mut rng = prng(seed ^ 0x5eed);
    let q = orthogonal(d_out, &mut rng);
    let p = orthogonal(d_in, &mut rng);
    let star = q.matmul(&base.w0).unwrap().matmul(&p.transpose()).unwrap();
    let y = star.matmul(&base.x).unwrap();
    LeastSquares { y, ..base }
}

#[test]
fn adamw_and_pion_converge_on_realizable_least_squares() {
    for seed in [3, 4] {
        let p = realizable(6, 6, 24, seed);
        let f0 = p.loss(&p.initial_params()).unwrap();
        let cosine = LrSchedule::Cosine { floor_fraction: LrSchedule::DEFAULT_FLOOR };
        let cfgs = [
            RunConfig {
                lr_schedule: cosine,
                ..ls_cfg(OptimizerSpec::Adamw(AdamWHyper { lr: 1e-2, ..Default::default() }), 5000)
            },
            ls_cfg(pion(PionConfig::raw(2e-2, ExpScheme::Cayley)), 5000),
        ];
        for cfg in cfgs {
            let rec = run_with_problem(&cfg, &p).unwrap();
            let ratio = rec.summary.final_loss / f0;
            assert!(ratio <= 1e-6, "seed {seed} {:?}: ratio {ratio:e}", cfg.optimizer);
        }
    }
}

#[test]
fn one_by_one_sweep_equals_run() {
    let cfg = ls_cfg(pion(PionConfig { lr: 4e-3, ..Default::default() }), 30);
    let grid = lr_sweep(&[8], &[4e-3], &cfg).unwrap();
    let direct = run(&RunConfig {
        problem: ProblemSpec::LeastSquares(LeastSquaresSpec { d_out: 8, d_in: 8, n_samples: 16 }),
        ..cfg
    })
    .unwrap();
    assert_eq!(grid.final_losses, vec![vec![direct.summary.final_loss]]);
    assert_eq!(grid.argmin_lr, vec![Some(4e-3)]);
    assert_eq!(summary_csv(&grid.summaries).lines().count(), 2);
}

#[test]
fn sweep_rejects_empty_axes() {
    let cfg = ls_cfg(pion(PionConfig::default()), 3);
    assert!(matches!(lr_sweep(&[], &[1e-3], &cfg), Err(Error::Config(_))));
    assert!(matches!(lr_sweep(&[4], &[], &cfg), Err(Error::Config(_))));
}

#[test]
fn config_round_trips_and_rejects_unknown_fields() {
    let cfgs = [
        ls_cfg(pion(PionConfig::transported()), 12),
        RunConfig {
            lr_schedule: LrSchedule::Cosine { floor_fraction: 0.05 },
            ..ls_cfg(OptimizerSpec::MuonLite(MuonLiteHyper::default()), 7)
        },
        RunConfig {
            problem: ProblemSpec::Mlp(MlpSpec { widths: vec![4, 6, 3], depth: 2, n_samples: 5 }),
            ..ls_cfg(pion(PionConfig { exp_scheme: ExpScheme::Taylor(4), ..Default::default() }), 3)
        },
    ];
    for cfg in cfgs {
        assert_eq!(config_parse(&cfg.to_json()).unwrap(), cfg);
    }
    let text = ls_cfg(pion(PionConfig::default()), 3).to_json().replace("\"steps\"", "\"stepz\"");
    assert!(matches!(config_parse(&text), Err(Error::Parse { .. })));
}

#[test]
fn overrides_apply_after_parse() {
    let text = ls_cfg(pion(PionConfig::default()), 3).to_json();
    let cfg = config_parse_with_overrides(&text, &[("lr".into(), "2e-3".into()), ("steps".into(), "9".into())]).unwrap();
    assert_eq!(cfg.optimizer.lr(), 2e-3);
    assert_eq!(cfg.steps, 9);
    let cfg = config_parse_with_overrides(&text, &[("exp_scheme".into(), "cayley".into())]).unwrap();
    let OptimizerSpec::Pion(p) = cfg.optimizer else { panic!() };
    assert_eq!(p.exp_scheme, ExpScheme::Cayley);
    assert!(config_parse_with_overrides(&text, &[("bogus".into(), "1".into())]).is_err());
    assert!(config_parse_with_overrides(&text, &[("steps".into(), "0".into())]).is_err());
}

#[test]
fn csv_file_is_written_whole() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let rec = run(&ls_cfg(pion(PionConfig::default()), 20)).unwrap();
    csv_write(&rec, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, metrics_csv(&rec));
    assert!(text.starts_with(METRICS_HEADER));
    assert!(text.ends_with('\n') && !text.contains('\r'));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    assert!(matches!(csv_write(&rec, &dir.path().join("missing/m.csv")), Err(Error::Io { .. })));
}

#[test]
fn cosine_schedule_endpoints() {
    let s = LrSchedule::Cosine { floor_fraction: 0.01 };
    assert_eq!(s.lr_at(0.5, 1, 100), 0.5);
    assert!((s.lr_at(0.5, 100, 100) - 0.005).abs() <= 1e-15);
    assert_eq!(LrSchedule::Constant.lr_at(0.5, 77, 100), 0.5);
}
