//! Small differentiable objectives over lists of weight matrices, each with
//! an analytic gradient that can be checked against central differences.

mod least_squares;
mod mlp;
mod procrustes;

pub use least_squares::{least_squares, LeastSquares};
pub use mlp::{mlp, Mlp};
pub use procrustes::{procrustes, Procrustes};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    /// `(d_out, d_in)` of every parameter, in order.
    fn shapes(&self) -> Vec<(usize, usize)>;

    fn initial_params(&self) -> Vec<Matrix>;

    fn loss(&self, params: &[Matrix]) -> Result<f64>;

    fn gradients(&self, params: &[Matrix]) -> Result<Vec<Matrix>>;

    fn loss_and_gradients(&self, params: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
        Ok((self.loss(params)?, self.gradients(params)?))
    }

    /// Known minimal loss, when the construction guarantees one.
    fn optimum_hint(&self) -> Option<f64> {
        None
    }

    /// Per-layer activation RMS, for problems that have layers.
    fn activation_norms(&self, _params: &[Matrix]) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }
}

pub(crate) fn check_params(shapes: &[(usize, usize)], params: &[Matrix], op: &'static str) -> Result<()> {
    if params.len() != shapes.len() {
        return Err(Error::shape(op, format!("expected {} parameters, got {}", shapes.len(), params.len())));
    }
    for (k, (p, &s)) in params.iter().zip(shapes).enumerate() {
        if p.shape() != s {
            return Err(Error::shape(op, format!("parameter {k} is {:?}, expected {s:?}", p.shape())));
        }
    }
    Ok(())
}

/// Central differences `(f(θ + h·e) − f(θ − h·e)) / 2h`, one entry at a time.
pub fn finite_difference_grads(p: &dyn Problem, params: &[Matrix], h: f64) -> Result<Vec<Matrix>> {
    if !(h > 0.0) {
        return Err(Error::Argument(format!("step h must be positive, got {h}")));
    }
    check_params(&p.shapes(), params, "finite_difference_grads")?;
    let mut work = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let (r, c) = params[k].shape();
        let mut gk = Matrix::zeros(r, c);
        for idx in 0..r * c {
            let orig = work[k].as_slice()[idx];
            work[k].as_mut_slice()[idx] = orig + h;
            let up = p.loss(&work)?;
            work[k].as_mut_slice()[idx] = orig - h;
            let down = p.loss(&work)?;
            work[k].as_mut_slice()[idx] = orig;
            gk.as_mut_slice()[idx] = (up - down) / (2.0 * h);
        }
        grads.push(gk);
    }
    Ok(grads)
}

/// Worst relative error `‖a − b‖_F / max(‖b‖_F, floor)` over a list of matrices.
pub fn max_relative_error(a: &[Matrix], b: &[Matrix], floor: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x.sub(y)?.frobenius_norm();
        worst = worst.max(diff / y.frobenius_norm().max(floor));
    }
    Ok(worst)
}
