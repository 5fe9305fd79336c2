//! Euclidean baselines: SGD with momentum, AdamW, and a small Muon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{newton_schulz_orthogonalize, Matrix, NS_DEFAULT_ITERS};

fn check(w: &Matrix, g: &Matrix, buf: &Matrix, op: &'static str) -> Result<()> {
    if w.shape() != g.shape() || buf.shape() != w.shape() {
        return Err(Error::shape(
            op,
            format!("weight {:?}, gradient {:?}, state {:?}", w.shape(), g.shape(), buf.shape()),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdHyper {
    pub lr: f64,
    pub momentum: f64,
}

impl Default for SgdHyper {
    fn default() -> Self {
        SgdHyper { lr: 1e-2, momentum: 0.9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgdState {
    pub buf: Matrix,
}

impl SgdState {
    pub fn new(d_out: usize, d_in: usize) -> Self {
        SgdState { buf: Matrix::zeros(d_out, d_in) }
    }
}

/// `b ← μb + G; W ← W − ηb`.
pub fn sgd_step(w: &Matrix, g: &Matrix, state: &mut SgdState, hyper: &SgdHyper) -> Result<Matrix> {
    check(w, g, &state.buf, "sgd_step")?;
    let b = state.buf.scale(hyper.momentum).add(g)?;
    let mut next = w.clone();
    next.add_scaled_assign(-hyper.lr, &b)?;
    state.buf = b;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWHyper {
    fn default() -> Self {
        AdamWHyper {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState {
    pub m: Matrix,
    pub v: Matrix,
    pub step: usize,
}

impl AdamWState {
    pub fn new(d_out: usize, d_in: usize) -> Self {
        AdamWState {
            m: Matrix::zeros(d_out, d_in),
            v: Matrix::zeros(d_out, d_in),
            step: 0,
        }
    }
}

/// AdamW with bias correction and decoupled weight decay.
pub fn adamw_step(w: &Matrix, g: &Matrix, state: &mut AdamWState, hyper: &AdamWHyper) -> Result<Matrix> {
    check(w, g, &state.m, "adamw_step")?;
    state.step += 1;
    let t = state.step as i32;
    state.m.ema_assign(hyper.beta1, g)?;
    state.v.ema_assign(hyper.beta2, &g.hadamard(g)?)?;
    let m_hat = state.m.scale(1.0 / (1.0 - hyper.beta1.powi(t)));
    let v_hat = state.v.scale(1.0 / (1.0 - hyper.beta2.powi(t)));
    let dir = Matrix::elem_div_sqrt_eps(&m_hat, &v_hat, hyper.eps)?;
    let mut next = w.scale(1.0 - hyper.lr * hyper.weight_decay);
    next.add_scaled_assign(-hyper.lr, &dir)?;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuonLiteHyper {
    pub lr: f64,
    pub beta1: f64,
    pub ns_iters: usize,
}

impl Default for MuonLiteHyper {
    fn default() -> Self {
        MuonLiteHyper {
            lr: 2e-2,
            beta1: 0.95,
            ns_iters: NS_DEFAULT_ITERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MuonLiteState {
    pub m: Matrix,
}

impl MuonLiteState {
    pub fn new(d_out: usize, d_in: usize) -> Self {
        MuonLiteState { m: Matrix::zeros(d_out, d_in) }
    }
}

/// `m ← βm + (1−β)G; W ← W − η·√(d_out/d_in)·NS(m)`.
pub fn muon_lite_step(w: &Matrix, g: &Matrix, state: &mut MuonLiteState, hyper: &MuonLiteHyper) -> Result<Matrix> {
    check(w, g, &state.m, "muon_lite_step")?;
    state.m.ema_assign(hyper.beta1, g)?;
    if state.m.is_zero() {
        return Ok(w.clone());
    }
    let (d_out, d_in) = w.shape();
    let ortho = newton_schulz_orthogonalize(&state.m, hyper.ns_iters)?;
    let mut next = w.clone();
    next.add_scaled_assign(-hyper.lr * (d_out as f64 / d_in as f64).sqrt(), &ortho)?;
    Ok(next)
}
