//! Built-in invariant checks at fixed seeds, grouped per module.
//!
//! The exponential used by the linalg suite is injectable so that a broken
//! kernel can be shown to make the suite fail.

use std::fmt::Write as _;

use crate::error::Result;
use crate::harness::{metrics_csv, run, LeastSquaresSpec, LrSchedule, OptimizerSpec, ProblemSpec, RunConfig};
use crate::linalg::{
    exp_cayley, exp_e2, exp_taylor, singular_values, solve, spectral_norm, Matrix, SPECTRAL_NORM_ITERS,
    SPECTRAL_NORM_TOL,
};
use crate::manifold::{descent_pairing, lie_gradients, spectrum_drift, stationarity_measure, SpectrumRef};
use crate::optim::{
    flop_estimate, pion_init, pion_step, ExpScheme, MomentumScheme, PionConfig, SecondMoment, UpdateMode,
};
use crate::problems::{
    finite_difference_grads, least_squares, max_relative_error, mlp, procrustes, Problem,
};
use crate::random::{gaussian, prng, skew};

pub type ExpE2Fn = fn(&Matrix, f64) -> Result<Matrix>;

#[derive(Clone, Copy)]
pub struct SelftestOptions {
    pub exp_e2: ExpE2Fn,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { exp_e2 }
    }
}

/// Drops the second-order term of `exp_e2`. Negative control for the suite.
pub fn corrupted_exp_e2(a: &Matrix, eta_alpha: f64) -> Result<Matrix> {
    let mut e = Matrix::identity(a.rows());
    e.add_scaled_assign(eta_alpha, a)?;
    Ok(e)
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub failures: Vec<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const SUITES: [&str; 5] = ["linalg", "manifold", "optim", "problems", "harness"];

pub fn run_selftest(opts: &SelftestOptions) -> Vec<SuiteResult> {
    vec![
        suite("linalg", || linalg_suite(opts)),
        suite("manifold", manifold_suite),
        suite("optim", optim_suite),
        suite("problems", problems_suite),
        suite("harness", harness_suite),
    ]
}

/// One line per suite, `PASS name` or `FAIL name: reasons`.
pub fn report(results: &[SuiteResult]) -> String {
    let mut out = String::new();
    for r in results {
        if r.passed() {
            let _ = writeln!(out, "PASS {}", r.name);
        } else {
            let _ = writeln!(out, "FAIL {}: {}", r.name, r.failures.join("; "));
        }
    }
    out
}

struct Checks(Vec<String>);

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.0.push(what());
        }
    }
}

fn suite(name: &'static str, body: impl FnOnce() -> Result<Vec<String>>) -> SuiteResult {
    let failures = match body() {
        Ok(f) => f,
        Err(e) => vec![format!("error: {e}")],
    };
    SuiteResult { name, failures }
}

fn orthogonality_error(e: &Matrix) -> Result<f64> {
    e.transpose().matmul(e)?.max_abs_diff(&Matrix::identity(e.rows()))
}

fn linalg_suite(opts: &SelftestOptions) -> Result<Vec<String>> {
    let mut c = Checks(Vec::new());
    let mut rng = prng(11);

    let a = Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
    let e = (opts.exp_e2)(&a, 0.1)?;
    let want = Matrix::from_rows(&[&[0.995, 0.1], &[-0.1, 0.995]]);
    let diff = e.max_abs_diff(&want)?;
    c.check(diff <= 1e-12, || format!("exp_e2 planar example off by {diff:e}"));

    for n in [3, 8, 16] {
        let s = skew(n, 1.0, &mut rng);
        let step = 1e-2;
        let err = orthogonality_error(&(opts.exp_e2)(&s, step)?)?;
        let a4 = s.scale(step).matmul(&s.scale(step))?;
        let bound = 0.25 * a4.matmul(&a4)?.frobenius_norm() + 1e-14;
        c.check(err <= bound, || format!("exp_e2 orthogonality {err:e} above {bound:e} at n={n}"));
        let taylor = exp_taylor(&s.scale(step), 2)?;
        let gap = (opts.exp_e2)(&s, step)?.max_abs_diff(&taylor)?;
        c.check(gap <= 1e-14, || format!("exp_e2 differs from order-2 Taylor by {gap:e}"));

        let q = exp_cayley(&s)?;
        let err = orthogonality_error(&q)?;
        c.check(err <= 1e-12, || format!("cayley orthogonality {err:e} at n={n}"));
    }

    let s = skew(6, 1.0, &mut rng);
    let exact = exp_taylor(&s.scale(0.05), 30)?;
    for order in 1..=4 {
        let e1 = exp_taylor(&s.scale(0.05), order)?.max_abs_diff(&exact)?;
        let e2 = exp_taylor(&s.scale(0.025), order)?.max_abs_diff(&exp_taylor(&s.scale(0.025), 30)?)?;
        let slope = (e1 / e2).log2();
        let lo = order as f64 + 0.5;
        let hi = order as f64 + 1.5;
        c.check(slope >= lo && slope <= hi, || format!("taylor order {order} halving slope {slope:.3}"));
    }

    let m = gaussian(7, 4, 1.0, &mut rng);
    let sv = singular_values(&m)?;
    let energy: f64 = sv.iter().map(|x| x * x).sum();
    let fro = m.frobenius_norm_sq();
    c.check((energy - fro).abs() <= 1e-10 * fro, || format!("singular energy {energy} vs {fro}"));
    c.check(sv.windows(2).all(|p| p[0] >= p[1]), || "singular values not descending".into());
    let top = spectral_norm(&m, SPECTRAL_NORM_ITERS * 4, 1e-12);
    c.check((top - sv[0]).abs() <= 1e-6 * sv[0], || format!("spectral norm {top} vs {}", sv[0]));
    let quick = spectral_norm(&m, SPECTRAL_NORM_ITERS, SPECTRAL_NORM_TOL);
    c.check(quick <= m.frobenius_norm() * (1.0 + 1e-12), || "spectral norm exceeds Frobenius".into());

    let a = gaussian(6, 6, 1.0, &mut rng);
    let b = gaussian(6, 2, 1.0, &mut rng);
    let x = solve(&a, &b)?;
    let resid = a.matmul(&x)?.max_abs_diff(&b)?;
    c.check(resid <= 1e-10, || format!("solve residual {resid:e}"));

    Ok(c.0)
}

fn manifold_suite() -> Result<Vec<String>> {
    let mut c = Checks(Vec::new());
    let mut rng = prng(12);
    for (o, i) in [(3, 5), (6, 2), (4, 4)] {
        let w = gaussian(o, i, 1.0, &mut rng);
        let g = gaussian(o, i, 1.0, &mut rng);
        let lp = lie_gradients(&w, &g)?;
        let skew_in = lp.g_in.skew_error()?;
        let skew_out = lp.g_out.skew_error()?;
        c.check(skew_in == 0.0 && skew_out == 0.0, || format!("lie gradients not skew ({skew_in:e}, {skew_out:e})"));
        let (p_in, p_out) = descent_pairing(&w, &g)?;
        let h_in = 0.5 * lp.g_in.frobenius_norm_sq();
        let h_out = 0.5 * lp.g_out.frobenius_norm_sq();
        c.check((p_in - h_in).abs() <= 1e-10 * h_in.max(1.0), || format!("in pairing {p_in} vs {h_in}"));
        c.check((p_out - h_out).abs() <= 1e-10 * h_out.max(1.0), || format!("out pairing {p_out} vs {h_out}"));
    }

    let p = procrustes(5, 3);
    let opt = p.target.clone();
    let g = p.gradients(std::slice::from_ref(&opt))?;
    let s = stationarity_measure(&opt, &g[0])?;
    c.check(s <= 1e-10, || format!("procrustes optimum stationarity {s:e}"));
    let g0 = p.gradients(std::slice::from_ref(&p.w0))?;
    let s0 = stationarity_measure(&p.w0, &g0[0])?;
    c.check(s0 > 1e-4, || format!("procrustes start stationarity {s0:e}"));

    Ok(c.0)
}

fn optim_suite() -> Result<Vec<String>> {
    let mut c = Checks(Vec::new());
    let p = least_squares(6, 9, 12, 13);
    let reference = SpectrumRef::capture(&p.w0, 0)?;

    let variants = [
        ("cayley lie", PionConfig { exp_scheme: ExpScheme::Cayley, ..Default::default() }, 1e-10),
        (
            "cayley transported",
            PionConfig { exp_scheme: ExpScheme::Cayley, ..PionConfig::transported() },
            1e-10,
        ),
        (
            "cayley alternating",
            PionConfig { exp_scheme: ExpScheme::Cayley, update_mode: UpdateMode::Alternating(1), ..Default::default() },
            1e-10,
        ),
        ("e2 lie", PionConfig::default(), 1e-4),
    ];
    for (name, cfg, tol) in variants {
        let mut st = pion_init(6, 9, &p.w0, &cfg)?;
        let mut w = p.w0.clone();
        for _ in 0..100 {
            let g = p.gradients(std::slice::from_ref(&w))?;
            w = pion_step(&w, &g[0], &mut st, &cfg)?.0;
        }
        let drift = spectrum_drift(&w, &reference)?;
        c.check(drift <= tol, || format!("{name}: drift {drift:e} above {tol:e}"));
        let l0 = p.loss(std::slice::from_ref(&p.w0))?;
        let l1 = p.loss(std::slice::from_ref(&w))?;
        c.check(l1 < l0, || format!("{name}: loss rose {l0} -> {l1}"));
    }

    let cfg = PionConfig { momentum_scheme: MomentumScheme::Lie, second_moment: SecondMoment::Lie, ..Default::default() };
    let f = flop_estimate(4, 4, 16, &cfg);
    c.check(f.lie_gradient == 4.0 * 64.0 + 4.0 * 64.0, || format!("lie gradient flops {}", f.lie_gradient));
    let alt = flop_estimate(4, 4, 16, &PionConfig { update_mode: UpdateMode::Alternating(1), ..cfg });
    let ratio = f.update_dominant / alt.update_dominant;
    c.check(ratio == 2.0, || format!("bilateral/alternating flop ratio {ratio}"));

    Ok(c.0)
}

fn problems_suite() -> Result<Vec<String>> {
    let mut c = Checks(Vec::new());
    let problems: Vec<Box<dyn Problem>> = vec![
        Box::new(least_squares(4, 5, 8, 21)),
        Box::new(procrustes(4, 22)),
        Box::new(mlp(&[5], 3, 6, 23)?),
    ];
    for p in &problems {
        let params = p.initial_params();
        let analytic = p.gradients(&params)?;
        let numeric = finite_difference_grads(p.as_ref(), &params, 1e-5)?;
        let err = max_relative_error(&analytic, &numeric, 1e-6)?;
        c.check(err <= 1e-5, || format!("{}: gradient relative error {err:e}", p.name()));
    }
    Ok(c.0)
}

fn harness_suite() -> Result<Vec<String>> {
    let mut c = Checks(Vec::new());
    let cfg = RunConfig {
        problem: ProblemSpec::LeastSquares(LeastSquaresSpec { d_out: 5, d_in: 7, n_samples: 10 }),
        optimizer: OptimizerSpec::Pion(PionConfig { lr: 1e-2, ..Default::default() }),
        steps: 30,
        record_every: 5,
        lr_schedule: LrSchedule::Constant,
        seed: 31,
    };
    let a = metrics_csv(&run(&cfg)?);
    let b = metrics_csv(&run(&cfg)?);
    c.check(a == b, || "repeated run produced a different CSV".into());
    c.check(a.lines().count() == 1 + 7, || format!("expected 8 CSV lines, got {}", a.lines().count()));

    let blowup = RunConfig { optimizer: OptimizerSpec::Pion(PionConfig { lr: 1e9, ..Default::default() }), ..cfg };
    let diverged = matches!(run(&blowup), Err(crate::Error::Divergence { .. }));
    c.check(diverged, || "lr=1e9 did not report divergence".into());
    Ok(c.0)
}
