//! Spectrum-preserving steps `W ← E_out · W · E_in` with `E = exp(ηα·A)`
//! for skew `A`, in three flavours: stateless, Lie-algebra moments, and
//! (transported) ambient moments.

use super::config::{ExpScheme, MomentumScheme, MupMode, PionConfig, SecondMoment, Side};
use crate::error::{Error, Result};
use crate::linalg::{
    exp_cayley, exp_e2, exp_taylor, newton_schulz_orthogonalize, spectral_norm, Matrix,
    SPECTRAL_NORM_ITERS, SPECTRAL_NORM_TOL,
};
use crate::manifold::{
    bilateral_normalize, lie_gradients, rms_alpha, stationarity_of, LiePair, SpectrumRef,
};

/// Per-weight optimizer state. Buffers exist only for the schemes selected
/// at [`pion_init`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamState {
    pub step: usize,
    pub m_in: Option<Matrix>,
    pub v_in: Option<Matrix>,
    pub m_out: Option<Matrix>,
    pub v_out: Option<Matrix>,
    pub m: Option<Matrix>,
    pub v: Option<Matrix>,
    pub spectrum_ref: SpectrumRef,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub alpha: f64,
    /// `‖W_{t+1} − W_t‖_F / η`.
    pub delta_w_fro_over_eta: f64,
    /// Stationarity of the raw gradient at the pre-step weight.
    pub stationarity: f64,
    pub side_taken: Side,
}

pub fn pion_init(d_out: usize, d_in: usize, w0: &Matrix, config: &PionConfig) -> Result<ParamState> {
    config.validate()?;
    if w0.shape() != (d_out, d_in) {
        return Err(Error::shape(
            "pion_init",
            format!("expected {d_out}x{d_in} weight, got {:?}", w0.shape()),
        ));
    }
    let lie_m = config.momentum_scheme == MomentumScheme::Lie;
    let lie_v = config.second_moment == SecondMoment::Lie;
    let amb_m = config.uses_ambient_state();
    let amb_v = config.second_moment == SecondMoment::Ambient;
    let buf = |on: bool, r: usize, c: usize| on.then(|| Matrix::zeros(r, c));
    Ok(ParamState {
        step: 0,
        m_in: buf(lie_m, d_in, d_in),
        v_in: buf(lie_v, d_in, d_in),
        m_out: buf(lie_m, d_out, d_out),
        v_out: buf(lie_v, d_out, d_out),
        m: buf(amb_m, d_out, d_in),
        v: buf(amb_v, d_out, d_in),
        spectrum_ref: SpectrumRef::capture(w0, 0)?,
    })
}

/// Conditions both generators for width-independent update sizes.
pub fn apply_mup(lp: &LiePair, mode: MupMode) -> Result<LiePair> {
    let side = |g: &Matrix| -> Result<Matrix> {
        if g.is_zero() {
            return Ok(g.clone());
        }
        match mode {
            MupMode::None => Ok(g.clone()),
            MupMode::SpectralNormalize { target } => {
                let s = spectral_norm(g, SPECTRAL_NORM_ITERS, SPECTRAL_NORM_TOL);
                Ok(if s > 0.0 { g.scale(target / s) } else { g.clone() })
            }
            MupMode::Orthogonalize { iters, .. } => newton_schulz_orthogonalize(g, iters),
        }
    };
    Ok(LiePair {
        g_in: side(&lp.g_in)?,
        g_out: side(&lp.g_out)?,
    })
}

/// `exp(s·A)` under the configured surrogate.
pub(crate) fn exp_map(a: &Matrix, s: f64, scheme: ExpScheme) -> Result<Matrix> {
    match scheme {
        ExpScheme::Taylor(order) => exp_taylor(&a.scale(s), order),
        ExpScheme::Cayley => exp_cayley(&a.scale(s)),
        ExpScheme::E2 => exp_e2(a, s),
    }
}

/// Generator preprocessing shared by every variant.
fn condition(lp: LiePair, config: &PionConfig) -> Result<LiePair> {
    let lp = if config.bilateral_normalize {
        bilateral_normalize(&lp).pair
    } else {
        lp
    };
    match config.mup_mode {
        MupMode::None => Ok(lp),
        mode => apply_mup(&lp, mode),
    }
}

fn step_alpha(config: &PionConfig, w: &Matrix, a_in: Option<&Matrix>, a_out: Option<&Matrix>) -> Result<f64> {
    if let MupMode::Orthogonalize { alpha, .. } = config.mup_mode {
        return Ok(alpha);
    }
    if config.rms_enabled {
        rms_alpha(w, a_in, a_out, config.rms_c, config.eps)
    } else {
        Ok(1.0)
    }
}

/// Rotation factors of one step; `None` on the side left untouched.
struct Rotation {
    e_out: Option<Matrix>,
    e_in: Option<Matrix>,
    alpha: f64,
}

impl Rotation {
    fn build(config: &PionConfig, w: &Matrix, a_in: &Matrix, a_out: &Matrix, side: Side) -> Result<Self> {
        let (use_in, use_out) = match side {
            Side::Both => (true, true),
            Side::In => (true, false),
            Side::Out => (false, true),
        };
        let alpha = step_alpha(config, w, use_in.then_some(a_in), use_out.then_some(a_out))?;
        let s = config.lr * alpha;
        Ok(Rotation {
            e_out: use_out.then(|| exp_map(a_out, s, config.exp_scheme)).transpose()?,
            e_in: use_in.then(|| exp_map(a_in, s, config.exp_scheme)).transpose()?,
            alpha,
        })
    }

    fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let left = match &self.e_out {
            Some(e) => e.matmul(x)?,
            None => x.clone(),
        };
        match &self.e_in {
            Some(e) => left.matmul(e),
            None => Ok(left),
        }
    }
}

fn report(config: &PionConfig, w: &Matrix, next: &Matrix, alpha: f64, stationarity: f64, side: Side) -> Result<StepReport> {
    Ok(StepReport {
        alpha,
        delta_w_fro_over_eta: next.sub(w)?.frobenius_norm() / config.lr,
        stationarity,
        side_taken: side,
    })
}

/// One bilateral step of plain orthogonal-equivalence descent,
/// `exp(−ηα·G_out) · W · exp(−ηα·G_in)`, with no moments.
pub fn pion_step_raw(w: &Matrix, g: &Matrix, config: &PionConfig) -> Result<(Matrix, StepReport)> {
    let lp = lie_gradients(w, g)?;
    let stationarity = stationarity_of(&lp);
    let lp = condition(lp, config)?;
    let a_in = lp.g_in.scale(-1.0);
    let a_out = lp.g_out.scale(-1.0);
    let rot = Rotation::build(config, w, &a_in, &a_out, Side::Both)?;
    let next = rot.apply(w)?;
    let rep = report(config, w, &next, rot.alpha, stationarity, Side::Both)?;
    Ok((next, rep))
}

fn bias_factor(config: &PionConfig, beta: f64, t: usize) -> f64 {
    if config.bias_correction {
        1.0 / (1.0 - beta.powi(t as i32))
    } else {
        1.0
    }
}

/// Lie-algebra variant: first and second moments of `G_in`/`G_out` are kept
/// on each algebra and both sides accumulate every step, even when the
/// weight update alternates.
pub fn pion_step_lie(w: &Matrix, g: &Matrix, state: &mut ParamState, config: &PionConfig) -> Result<(Matrix, StepReport)> {
    if config.uses_ambient_state() || config.second_moment == SecondMoment::Ambient {
        return Err(Error::State("ambient schemes use pion_step_transported".into()));
    }
    let (d_out, d_in) = w.shape();
    let lie_m = config.momentum_scheme == MomentumScheme::Lie;
    let lie_v = config.second_moment == SecondMoment::Lie;
    if lie_m != (state.m_in.is_some() && state.m_out.is_some())
        || lie_v != (state.v_in.is_some() && state.v_out.is_some())
    {
        return Err(Error::State("lie moment buffers do not match the configured schemes".into()));
    }
    if let Some(m_in) = &state.m_in {
        if m_in.rows() != d_in || state.m_out.as_ref().map(Matrix::rows) != Some(d_out) {
            return Err(Error::State(format!("moment buffers are not sized for a {d_out}x{d_in} weight")));
        }
    }

    let t = state.step + 1;
    let lp = lie_gradients(w, g)?;
    let stationarity = stationarity_of(&lp);
    let lp = condition(lp, config)?;

    let (m_in, m_out) = if lie_m {
        let m_in = state.m_in.as_mut().expect("checked above");
        m_in.ema_assign(config.beta1, &lp.g_in)?;
        let m_out = state.m_out.as_mut().expect("checked above");
        m_out.ema_assign(config.beta1, &lp.g_out)?;
        (m_in.clone(), m_out.clone())
    } else {
        (lp.g_in.clone(), lp.g_out.clone())
    };
    let mc = if lie_m { bias_factor(config, config.beta1, t) } else { 1.0 };

    let (a_in, a_out) = if lie_v {
        let v_in = state.v_in.as_mut().expect("checked above");
        v_in.ema_assign(config.beta2, &lp.g_in.hadamard(&lp.g_in)?)?;
        let v_out = state.v_out.as_mut().expect("checked above");
        v_out.ema_assign(config.beta2, &lp.g_out.hadamard(&lp.g_out)?)?;
        let vc = bias_factor(config, config.beta2, t);
        (
            Matrix::elem_div_sqrt_eps(&m_in.scale(mc), &v_in.scale(vc), config.eps)?.scale(-1.0),
            Matrix::elem_div_sqrt_eps(&m_out.scale(mc), &v_out.scale(vc), config.eps)?.scale(-1.0),
        )
    } else {
        (m_in.scale(-mc), m_out.scale(-mc))
    };

    let side = config.side_at(t);
    let rot = Rotation::build(config, w, &a_in, &a_out, side)?;
    let next = rot.apply(w)?;
    state.step = t;
    let rep = report(config, w, &next, rot.alpha, stationarity, side)?;
    Ok((next, rep))
}

/// Ambient-moment variant: `m`, `v` live in weight space, the Lie generators
/// are taken from the preconditioned momentum, and with
/// `TransportedAmbient` the momentum is rotated by the same factors as `W`.
pub fn pion_step_transported(
    w: &Matrix,
    g: &Matrix,
    state: &mut ParamState,
    config: &PionConfig,
) -> Result<(Matrix, StepReport)> {
    if !config.uses_ambient_state() {
        return Err(Error::State("pion_step_transported needs an ambient momentum scheme".into()));
    }
    let amb_v = config.second_moment == SecondMoment::Ambient;
    let m = state
        .m
        .as_mut()
        .ok_or_else(|| Error::State("missing ambient first moment".into()))?;
    if m.shape() != w.shape() {
        return Err(Error::State(format!("ambient moment is {:?}, weight is {:?}", m.shape(), w.shape())));
    }
    if amb_v != state.v.is_some() {
        return Err(Error::State("ambient second moment does not match the configured scheme".into()));
    }
    let t = state.step + 1;
    let stationarity = stationarity_of(&lie_gradients(w, g)?);

    m.ema_assign(config.beta1, g)?;
    let mc = bias_factor(config, config.beta1, t);
    let direction = if amb_v {
        let v = state.v.as_mut().expect("checked above");
        v.ema_assign(config.beta2, &m.hadamard(m)?)?;
        let vc = bias_factor(config, config.beta2, t);
        Matrix::elem_div_sqrt_eps(&m.scale(mc), &v.scale(vc), config.eps)?
    } else {
        m.scale(mc)
    };

    let lp = condition(lie_gradients(w, &direction)?, config)?;
    let a_in = lp.g_in.scale(-1.0);
    let a_out = lp.g_out.scale(-1.0);
    let side = config.side_at(t);
    let rot = Rotation::build(config, w, &a_in, &a_out, side)?;
    let next = rot.apply(w)?;
    if config.momentum_scheme == MomentumScheme::TransportedAmbient {
        let m = state.m.as_mut().expect("checked above");
        *m = rot.apply(m)?;
    }
    state.step = t;
    let rep = report(config, w, &next, rot.alpha, stationarity, side)?;
    Ok((next, rep))
}

/// Dispatches to the step matching the configured schemes. Stateless
/// bilateral configurations take the raw path.
pub fn pion_step(w: &Matrix, g: &Matrix, state: &mut ParamState, config: &PionConfig) -> Result<(Matrix, StepReport)> {
    if config.uses_ambient_state() {
        return pion_step_transported(w, g, state, config);
    }
    let stateless = config.momentum_scheme == MomentumScheme::None
        && config.second_moment == SecondMoment::None
        && config.side_at(1) == Side::Both;
    if stateless {
        let out = pion_step_raw(w, g, config)?;
        state.step += 1;
        Ok(out)
    } else {
        pion_step_lie(w, g, state, config)
    }
}
