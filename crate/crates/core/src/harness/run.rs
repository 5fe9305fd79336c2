use std::time::Instant;

use serde::Serialize;

use super::config::{OptimizerSpec, RunConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::manifold::{spectrum_drift, stationarity_measure, SpectrumRef};
use crate::optim::{
    adamw_step, muon_lite_step, pion_init, pion_step, sgd_step, AdamWState, MuonLiteState, ParamState,
    SgdState,
};
use crate::problems::Problem;

/// Losses above this count as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e12;

/// One CSV row: a parameter's diagnostics at one recorded step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub step: usize,
    pub loss: f64,
    pub param_id: usize,
    pub update_fro_over_eta: f64,
    pub spectrum_drift: f64,
    pub stationarity: f64,
    pub weight_fro: f64,
    /// Step coefficient of spectrum-preserving optimizers; 0 for baselines.
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub final_loss: f64,
    /// Smallest total stationarity (summed over parameters) among recorded steps.
    pub min_stationarity: f64,
    pub max_drift: f64,
    pub steps_completed: usize,
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub rows: Vec<MetricRow>,
    /// `(step, per-layer activation RMS)` at each recorded step, when the
    /// problem has layers.
    pub activation_norms: Vec<(usize, Vec<f64>)>,
    pub summary: RunSummary,
}

impl RunRecord {
    fn new() -> Self {
        RunRecord {
            rows: Vec::new(),
            activation_norms: Vec::new(),
            summary: RunSummary {
                final_loss: f64::NAN,
                min_stationarity: f64::INFINITY,
                max_drift: 0.0,
                steps_completed: 0,
                wall_time_secs: 0.0,
            },
        }
    }

    /// `(step, loss)` for every recorded step.
    pub fn losses(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for r in &self.rows {
            if out.last().map(|&(s, _)| s) != Some(r.step) {
                out.push((r.step, r.loss));
            }
        }
        out
    }

    pub fn max_drift(&self) -> f64 {
        self.rows.iter().map(|r| r.spectrum_drift).fold(0.0, f64::max)
    }
}

enum OptState {
    Pion(ParamState),
    Sgd(SgdState),
    AdamW(AdamWState),
    Muon(MuonLiteState),
}

struct StepOut {
    next: Matrix,
    alpha: f64,
}

fn init_state(spec: &OptimizerSpec, w0: &Matrix) -> Result<OptState> {
    let (r, c) = w0.shape();
    Ok(match spec {
        OptimizerSpec::Pion(cfg) => OptState::Pion(pion_init(r, c, w0, cfg)?),
        OptimizerSpec::Sgd(_) => OptState::Sgd(SgdState::new(r, c)),
        OptimizerSpec::Adamw(_) => OptState::AdamW(AdamWState::new(r, c)),
        OptimizerSpec::MuonLite(_) => OptState::Muon(MuonLiteState::new(r, c)),
    })
}

fn step_one(spec: &OptimizerSpec, lr: f64, state: &mut OptState, w: &Matrix, g: &Matrix) -> Result<StepOut> {
    match (spec, state) {
        (OptimizerSpec::Pion(cfg), OptState::Pion(st)) => {
            let cfg = crate::optim::PionConfig { lr, ..*cfg };
            let (next, rep) = pion_step(w, g, st, &cfg)?;
            Ok(StepOut { next, alpha: rep.alpha })
        }
        (OptimizerSpec::Sgd(h), OptState::Sgd(st)) => {
            let h = crate::optim::SgdHyper { lr, ..*h };
            Ok(StepOut { next: sgd_step(w, g, st, &h)?, alpha: 0.0 })
        }
        (OptimizerSpec::Adamw(h), OptState::AdamW(st)) => {
            let h = crate::optim::AdamWHyper { lr, ..*h };
            Ok(StepOut { next: adamw_step(w, g, st, &h)?, alpha: 0.0 })
        }
        (OptimizerSpec::MuonLite(h), OptState::Muon(st)) => {
            let h = crate::optim::MuonLiteHyper { lr, ..*h };
            Ok(StepOut { next: muon_lite_step(w, g, st, &h)?, alpha: 0.0 })
        }
        _ => Err(Error::State("optimizer state does not match its spec".into())),
    }
}

struct Recorder<'a> {
    problem: &'a dyn Problem,
    refs: Vec<SpectrumRef>,
    record: RunRecord,
}

impl Recorder<'_> {
    fn push(
        &mut self,
        step: usize,
        loss: f64,
        params: &[Matrix],
        grads: &[Matrix],
        updates: &[(f64, f64)],
    ) -> Result<()> {
        let mut total_stationarity = 0.0;
        for (k, (w, g)) in params.iter().zip(grads).enumerate() {
            let stationarity = stationarity_measure(w, g)?;
            total_stationarity += stationarity;
            let drift = spectrum_drift(w, &self.refs[k])?;
            self.record.summary.max_drift = self.record.summary.max_drift.max(drift);
            let (update_fro_over_eta, alpha) = updates[k];
            self.record.rows.push(MetricRow {
                step,
                loss,
                param_id: k,
                update_fro_over_eta,
                spectrum_drift: drift,
                stationarity,
                weight_fro: w.frobenius_norm(),
                alpha,
            });
        }
        let acts = self.problem.activation_norms(params)?;
        if !acts.is_empty() {
            self.record.activation_norms.push((step, acts));
        }
        let s = &mut self.record.summary;
        s.min_stationarity = s.min_stationarity.min(total_stationarity);
        s.final_loss = loss;
        s.steps_completed = step;
        Ok(())
    }
}

fn diverged(loss: f64) -> bool {
    !loss.is_finite() || loss > DIVERGENCE_LOSS
}

/// Builds the configured problem from `cfg.seed` and runs it.
pub fn run(cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let problem = cfg.problem.build(cfg.seed)?;
    run_with_problem(cfg, problem.as_ref())
}

/// Steps `cfg.optimizer` on `problem` for `cfg.steps` steps, recording the
/// step-0 baseline, every `record_every`-th step, and the final step.
///
/// A non-finite loss or one above [`DIVERGENCE_LOSS`] ends the run with
/// [`Error::Divergence`], which carries every row recorded before it.
pub fn run_with_problem(cfg: &RunConfig, problem: &dyn Problem) -> Result<RunRecord> {
    cfg.validate()?;
    let started = Instant::now();
    let mut params = problem.initial_params();
    let shapes = problem.shapes();
    if params.len() != shapes.len() || params.iter().zip(&shapes).any(|(p, s)| p.shape() != *s) {
        return Err(Error::Config("problem initial parameters do not match its shapes".into()));
    }
    let mut states = params
        .iter()
        .map(|w| init_state(&cfg.optimizer, w))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| match e {
            Error::Shape { .. } | Error::State(_) => Error::Config(e.to_string()),
            other => other,
        })?;
    let refs = params
        .iter()
        .map(|w| SpectrumRef::capture(w, 0))
        .collect::<Result<Vec<_>>>()?;
    let mut rec = Recorder {
        problem,
        refs,
        record: RunRecord::new(),
    };

    let (mut loss, mut grads) = problem.loss_and_gradients(&params)?;
    if diverged(loss) {
        return Err(divergence(0, loss, rec.record, started));
    }
    rec.push(0, loss, &params, &grads, &vec![(0.0, 0.0); params.len()])?;

    let base_lr = cfg.optimizer.lr();
    for t in 1..=cfg.steps {
        let lr = cfg.lr_schedule.lr_at(base_lr, t, cfg.steps);
        let mut updates = Vec::with_capacity(params.len());
        let mut next_params = Vec::with_capacity(params.len());
        for ((w, g), state) in params.iter().zip(&grads).zip(states.iter_mut()) {
            let out = step_one(&cfg.optimizer, lr, state, w, g)?;
            let moved = out.next.sub(w)?.frobenius_norm() / lr;
            updates.push((moved, out.alpha));
            next_params.push(out.next);
        }
        params = next_params;
        let evaluated = problem.loss_and_gradients(&params)?;
        loss = evaluated.0;
        grads = evaluated.1;
        if diverged(loss) || !updates.iter().all(|(u, _)| u.is_finite()) {
            return Err(divergence(t, loss, rec.record, started));
        }
        if t % cfg.record_every == 0 || t == cfg.steps {
            rec.push(t, loss, &params, &grads, &updates)?;
        }
    }
    let mut record = rec.record;
    record.summary.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(record)
}

fn divergence(step: usize, loss: f64, mut record: RunRecord, started: Instant) -> Error {
    record.summary.wall_time_secs = started.elapsed().as_secs_f64();
    Error::Divergence {
        step,
        loss,
        record: Box::new(record),
    }
}
