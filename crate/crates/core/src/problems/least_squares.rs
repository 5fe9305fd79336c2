use super::{check_params, Problem};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::random;

/// `f(W) = ½‖WX − Y‖_F²` with fixed standard-normal `X` (`d_in×n`) and
/// `Y` (`d_out×n`).
#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub x: Matrix,
    pub y: Matrix,
    pub w0: Matrix,
}

/// Draw order from `prng(seed)`: `X`, then `Y`, then the initial weight.
pub fn least_squares(d_out: usize, d_in: usize, n_samples: usize, seed: u64) -> LeastSquares {
    let mut rng = random::prng(seed);
    let x = random::gaussian(d_in, n_samples, 1.0, &mut rng);
    let y = random::gaussian(d_out, n_samples, 1.0, &mut rng);
    let w0 = random::spectral_init(d_out, d_in, &mut rng);
    LeastSquares { x, y, w0 }
}

impl LeastSquares {
    fn residual(&self, w: &Matrix) -> Result<Matrix> {
        w.matmul(&self.x)?.sub(&self.y)
    }
}

impl Problem for LeastSquares {
    fn name(&self) -> &str {
        "least_squares"
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![self.w0.shape()]
    }

    fn initial_params(&self) -> Vec<Matrix> {
        vec![self.w0.clone()]
    }

    fn loss(&self, params: &[Matrix]) -> Result<f64> {
        check_params(&self.shapes(), params, "least_squares")?;
        Ok(0.5 * self.residual(&params[0])?.frobenius_norm_sq())
    }

    fn gradients(&self, params: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(self.loss_and_gradients(params)?.1)
    }

    fn loss_and_gradients(&self, params: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
        check_params(&self.shapes(), params, "least_squares")?;
        let r = self.residual(&params[0])?;
        let g = r.matmul(&self.x.transpose())?;
        Ok((0.5 * r.frobenius_norm_sq(), vec![g]))
    }
}
