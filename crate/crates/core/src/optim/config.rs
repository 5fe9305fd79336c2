use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which surrogate stands in for the matrix exponential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpScheme {
    /// Truncated power series of the given order.
    Taylor(usize),
    Cayley,
    /// `I + ηαA + ½(ηαA)²`.
    E2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumScheme {
    None,
    /// First moments kept on both Lie algebras.
    Lie,
    /// Ambient first moment, never transported.
    Ambient,
    /// Ambient first moment carried along by the step's rotations.
    TransportedAmbient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondMoment {
    None,
    Lie,
    Ambient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    Bilateral,
    /// Rotate one side per step, switching sides every `period` steps.
    Alternating(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MupMode {
    None,
    /// Rescale each generator to the given spectral norm.
    SpectralNormalize { target: f64 },
    /// Replace each generator by its Newton–Schulz polar factor and use a
    /// fixed step coefficient `alpha` instead of RMS scaling.
    Orthogonalize { iters: usize, alpha: f64 },
}

impl MupMode {
    pub const DEFAULT_TARGET: f64 = 1.0;
    pub const DEFAULT_ORTHO_ALPHA: f64 = 10.0;

    pub fn spectral() -> Self {
        MupMode::SpectralNormalize { target: Self::DEFAULT_TARGET }
    }

    pub fn orthogonalize() -> Self {
        MupMode::Orthogonalize {
            iters: crate::linalg::NS_DEFAULT_ITERS,
            alpha: Self::DEFAULT_ORTHO_ALPHA,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    In,
    Out,
    Both,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::In => "in",
            Side::Out => "out",
            Side::Both => "both",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PionConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rms_c: f64,
    pub eps: f64,
    pub exp_scheme: ExpScheme,
    pub momentum_scheme: MomentumScheme,
    pub second_moment: SecondMoment,
    pub update_mode: UpdateMode,
    pub mup_mode: MupMode,
    pub rms_enabled: bool,
    pub bias_correction: bool,
    /// Rescale both generators to `√d` Frobenius norm before anything else.
    pub bilateral_normalize: bool,
}

impl Default for PionConfig {
    fn default() -> Self {
        PionConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.95,
            rms_c: 0.2,
            eps: 1e-8,
            exp_scheme: ExpScheme::E2,
            momentum_scheme: MomentumScheme::Lie,
            second_moment: SecondMoment::Lie,
            update_mode: UpdateMode::Bilateral,
            mup_mode: MupMode::None,
            rms_enabled: true,
            bias_correction: false,
            bilateral_normalize: false,
        }
    }
}

impl PionConfig {
    /// Plain orthogonal-equivalence descent: no moments, no scaling.
    pub fn raw(lr: f64, exp_scheme: ExpScheme) -> Self {
        PionConfig {
            lr,
            exp_scheme,
            momentum_scheme: MomentumScheme::None,
            second_moment: SecondMoment::None,
            rms_enabled: false,
            ..PionConfig::default()
        }
    }

    /// Transported ambient first moment with ambient second moment.
    pub fn transported() -> Self {
        PionConfig {
            momentum_scheme: MomentumScheme::TransportedAmbient,
            second_moment: SecondMoment::Ambient,
            ..PionConfig::default()
        }
    }

    pub fn uses_ambient_state(&self) -> bool {
        matches!(
            self.momentum_scheme,
            MomentumScheme::Ambient | MomentumScheme::TransportedAmbient
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive and finite, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad(format!("beta1 must lie in [0, 1), got {}", self.beta1));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("beta2 must lie in [0, 1), got {}", self.beta2));
        }
        if !(self.rms_c > 0.0) {
            return bad(format!("rms_c must be positive, got {}", self.rms_c));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if let ExpScheme::Taylor(0) = self.exp_scheme {
            return bad("taylor order must be at least 1".into());
        }
        if let UpdateMode::Alternating(0) = self.update_mode {
            return bad("alternating period must be at least 1".into());
        }
        match self.mup_mode {
            MupMode::SpectralNormalize { target } if !(target > 0.0) => {
                return bad(format!("spectral target must be positive, got {target}"));
            }
            MupMode::Orthogonalize { iters, alpha } if iters == 0 || !(alpha > 0.0) => {
                return bad(format!("orthogonalize needs iters >= 1 and alpha > 0 (iters={iters}, alpha={alpha})"));
            }
            _ => {}
        }
        match (self.momentum_scheme, self.second_moment) {
            (MomentumScheme::None | MomentumScheme::Lie, SecondMoment::Ambient) => bad(
                "lie-side first moments pair only with second_moment none or lie".into(),
            ),
            (MomentumScheme::Ambient | MomentumScheme::TransportedAmbient, SecondMoment::Lie) => bad(
                "ambient first moments pair only with second_moment none or ambient".into(),
            ),
            _ => Ok(()),
        }
    }

    /// Which side an alternating schedule rotates at step `t` (counted from 1).
    pub fn side_at(&self, t: usize) -> Side {
        match self.update_mode {
            UpdateMode::Bilateral => Side::Both,
            UpdateMode::Alternating(period) => {
                let block = (t.max(1) - 1) / period + 1;
                if block % 2 == 0 {
                    Side::Out
                } else {
                    Side::In
                }
            }
        }
    }
}
