//! Geometry of the isospectral manifold `{U W₀ Vᵀ}`.
//!
//! A Euclidean gradient `G` at `W` is pulled back to a pair of skew-symmetric
//! generators, one acting on the input space (`WᵀG − GᵀW`) and one on the
//! output space (`GWᵀ − WGᵀ`). Rotating `W` by their exponentials moves along
//! the manifold and leaves the singular values untouched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{singular_values, Matrix};

/// Skew-symmetric in-side (`d_in×d_in`) and out-side (`d_out×d_out`) generators.
#[derive(Clone, Debug, PartialEq)]
pub struct LiePair {
    pub g_in: Matrix,
    pub g_out: Matrix,
}

impl LiePair {
    pub fn zeros(d_out: usize, d_in: usize) -> Self {
        LiePair {
            g_in: Matrix::zeros(d_in, d_in),
            g_out: Matrix::zeros(d_out, d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.g_in.rows()
    }

    pub fn d_out(&self) -> usize {
        self.g_out.rows()
    }
}

/// Singular values of `W₀`, the invariant every spectrum-preserving step keeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRef {
    pub values: Vec<f64>,
    pub captured_at_step: usize,
}

impl SpectrumRef {
    pub fn capture(w: &Matrix, step: usize) -> Result<Self> {
        Ok(SpectrumRef {
            values: singular_values(w)?,
            captured_at_step: step,
        })
    }
}

fn check_pair(w: &Matrix, g: &Matrix, op: &'static str) -> Result<()> {
    if w.shape() != g.shape() {
        return Err(Error::shape(
            op,
            format!("weight {:?} vs gradient {:?}", w.shape(), g.shape()),
        ));
    }
    Ok(())
}

/// Writes `x − xᵀ` with the upper and lower halves computed from one product,
/// so the result is skew to the last bit.
fn antisymmetrize(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = x.get(i, j) - x.get(j, i);
            s.set(i, j, v);
            s.set(j, i, -v);
        }
    }
    s
}

pub fn lie_gradients(w: &Matrix, g: &Matrix) -> Result<LiePair> {
    check_pair(w, g, "lie_gradients")?;
    let wt_g = w.transpose().matmul(g)?;
    let g_wt = g.matmul(&w.transpose())?;
    Ok(LiePair {
        g_in: antisymmetrize(&wt_g),
        g_out: antisymmetrize(&g_wt),
    })
}

/// `(⟨G, W·G_in⟩, ⟨G, G_out·W⟩)`, the first-order decrease along each side.
pub fn descent_pairing(w: &Matrix, g: &Matrix) -> Result<(f64, f64)> {
    let lp = lie_gradients(w, g)?;
    let in_side = g.dot(&w.matmul(&lp.g_in)?)?;
    let out_side = g.dot(&lp.g_out.matmul(w)?)?;
    Ok((in_side, out_side))
}

/// `‖G_in‖_F² + ‖G_out‖_F²`.
pub fn stationarity_measure(w: &Matrix, g: &Matrix) -> Result<f64> {
    let lp = lie_gradients(w, g)?;
    Ok(stationarity_of(&lp))
}

pub fn stationarity_of(lp: &LiePair) -> f64 {
    lp.g_in.frobenius_norm_sq() + lp.g_out.frobenius_norm_sq()
}

pub fn is_first_order_stationary(w: &Matrix, g: &Matrix, tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let s = stationarity_measure(w, g)?;
    let scale = 1.0 + w.frobenius_norm_sq() * g.frobenius_norm_sq();
    Ok(s <= tol * tol * scale)
}

/// Planar rotation angles of a skew matrix, one per 2×2 block, descending.
pub fn rotation_angles(s: &Matrix) -> Result<Vec<f64>> {
    let err = s.skew_error()?;
    if err > 1e-10 {
        return Err(Error::Domain {
            op: "rotation_angles",
            detail: format!("input is not skew-symmetric (‖S + Sᵀ‖_F = {err:e})"),
        });
    }
    let sv = singular_values(s)?;
    Ok(sv.chunks(2).filter(|c| c.len() == 2).map(|c| 0.5 * (c[0] + c[1])).collect())
}

/// Result of [`bilateral_normalize`]; flags mark sides that were zero and
/// passed through unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub pair: LiePair,
    pub in_passthrough: bool,
    pub out_passthrough: bool,
}

/// Rescales each side to Frobenius norm `√d` of its own dimension.
pub fn bilateral_normalize(lp: &LiePair) -> Normalized {
    let rescale = |g: &Matrix| -> (Matrix, bool) {
        let norm = g.frobenius_norm();
        if norm == 0.0 {
            (g.clone(), true)
        } else {
            (g.scale((g.rows() as f64).sqrt() / norm), false)
        }
    };
    let (g_in, in_passthrough) = rescale(&lp.g_in);
    let (g_out, out_passthrough) = rescale(&lp.g_out);
    Normalized {
        pair: LiePair { g_in, g_out },
        in_passthrough,
        out_passthrough,
    }
}

/// RMS scaling coefficient
/// `α = c√(d_out·d_in) / (‖A_out·W + W·A_in‖_F + ε)`, with the absent side
/// dropped from the denominator for one-sided steps.
pub fn rms_alpha(
    w: &Matrix,
    a_in: Option<&Matrix>,
    a_out: Option<&Matrix>,
    c: f64,
    eps: f64,
) -> Result<f64> {
    if !(c > 0.0) || !(eps > 0.0) {
        return Err(Error::Argument(format!("rms_alpha needs c > 0 and eps > 0 (c={c}, eps={eps})")));
    }
    let (d_out, d_in) = w.shape();
    let direction = match (a_in, a_out) {
        (None, None) => {
            return Err(Error::Argument("rms_alpha needs at least one side".into()));
        }
        (Some(a_in), None) => w.matmul(a_in)?,
        (None, Some(a_out)) => a_out.matmul(w)?,
        (Some(a_in), Some(a_out)) => a_out.matmul(w)?.add(&w.matmul(a_in)?)?,
    };
    Ok(c * ((d_out * d_in) as f64).sqrt() / (direction.frobenius_norm() + eps))
}

/// `max_i |σ_i(W) − ref_i| / ref_0`.
pub fn spectrum_drift(w: &Matrix, reference: &SpectrumRef) -> Result<f64> {
    let k = w.rows().min(w.cols());
    if k != reference.values.len() {
        return Err(Error::shape(
            "spectrum_drift",
            format!("{} singular values vs {} reference values", k, reference.values.len()),
        ));
    }
    let sv = singular_values(w)?;
    let worst = sv
        .iter()
        .zip(&reference.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(worst / (reference.values[0] + 1e-300))
}
