//! Closed-form per-step cost of a Pion update on one `d_out×d_in` weight.

use serde::Serialize;

use super::config::{PionConfig, UpdateMode};

/// Floating-point operation counts; alternating costs are averaged over
/// two consecutive steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlopBreakdown {
    /// `WᵀG − GᵀW` and `GWᵀ − WGᵀ`.
    pub lie_gradient: f64,
    /// Forming `A_out·W + W·A_in` for the RMS coefficient.
    pub rms: f64,
    /// Multiplying the exponential factors into `W`.
    pub update_apply: f64,
    /// Squaring the Lie matrices inside the second-order exponential.
    pub squared_lie: f64,
    /// `rms + update_apply`, the quadratic-in-width update-side cost.
    pub update_dominant: f64,
    pub total: f64,
    /// Forward and backward cost of the layer, `B·d_out·d_in`.
    pub baseline: f64,
    /// `(d_out + d_in)/B + (d_out³ + d_in³)/(B·d_out·d_in)`.
    pub relative_overhead: f64,
}

pub fn flop_estimate(d_out: usize, d_in: usize, batch_tokens: usize, config: &PionConfig) -> FlopBreakdown {
    let (o, i, b) = (d_out as f64, d_in as f64, batch_tokens as f64);
    let lie_gradient = 4.0 * o * i * i + 4.0 * o * o * i;
    let mut rms = 2.0 * o * o * i + 2.0 * o * i * i;
    let mut update_apply = 2.0 * o * o * i + 2.0 * o * i * i;
    let mut squared_lie = o * o * o + i * i * i;
    if let UpdateMode::Alternating(_) = config.update_mode {
        rms /= 2.0;
        update_apply /= 2.0;
        squared_lie /= 2.0;
    }
    let update_dominant = rms + update_apply;
    let baseline = b * o * i;
    FlopBreakdown {
        lie_gradient,
        rms,
        update_apply,
        squared_lie,
        update_dominant,
        total: lie_gradient + update_dominant + squared_lie,
        baseline,
        relative_overhead: (o + i) / b + (o * o * o + i * i * i) / (b * o * i),
    }
}
