use super::{check_params, Problem};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::random;

/// Bias-free, normalization-free tanh network regressing onto a random
/// teacher of the same architecture.
///
/// Layer `l` maps `widths[l] → widths[l+1]`; every layer but the last is
/// followed by `tanh`. Loss is `½‖f(X) − Y‖_F² / n`.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub widths: Vec<usize>,
    pub x: Matrix,
    pub y: Matrix,
    pub w0: Vec<Matrix>,
}

/// `widths` either lists all `depth + 1` layer widths or holds a single
/// width used everywhere.
///
/// Draw order from `prng(seed)`: `X`, the teacher layers, then the student
/// layers (spectral init, distinct singular values).
pub fn mlp(widths: &[usize], depth: usize, n_samples: usize, seed: u64) -> Result<Mlp> {
    if depth == 0 {
        return Err(Error::Argument("mlp depth must be at least 1".into()));
    }
    let widths: Vec<usize> = match widths {
        [w] => vec![*w; depth + 1],
        ws if ws.len() == depth + 1 => ws.to_vec(),
        ws => {
            return Err(Error::Argument(format!(
                "mlp of depth {depth} needs 1 or {} widths, got {}",
                depth + 1,
                ws.len()
            )))
        }
    };
    if widths.contains(&0) || n_samples == 0 {
        return Err(Error::Argument("mlp widths and sample count must be positive".into()));
    }
    let mut rng = random::prng(seed);
    let x = random::gaussian(widths[0], n_samples, 1.0, &mut rng);
    let teacher: Vec<Matrix> = widths
        .windows(2)
        .map(|p| random::gaussian(p[1], p[0], 1.0 / (p[0] as f64).sqrt(), &mut rng))
        .collect();
    let w0: Vec<Matrix> = widths
        .windows(2)
        .map(|p| random::spectral_init(p[1], p[0], &mut rng))
        .collect();
    let y = forward(&teacher, &x)?.pop().expect("at least one layer");
    Ok(Mlp { widths, x, y, w0 })
}

/// Activations `[H₀ = X, H₁, …, H_depth]`, the last one linear.
fn forward(params: &[Matrix], x: &Matrix) -> Result<Vec<Matrix>> {
    let mut acts = Vec::with_capacity(params.len() + 1);
    acts.push(x.clone());
    for (l, w) in params.iter().enumerate() {
        let z = w.matmul(acts.last().expect("nonempty"))?;
        acts.push(if l + 1 < params.len() { z.map(f64::tanh) } else { z });
    }
    Ok(acts)
}

impl Mlp {
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    /// Same network on caller-supplied data.
    pub fn with_data(widths: Vec<usize>, x: Matrix, y: Matrix, w0: Vec<Matrix>) -> Self {
        Mlp { widths, x, y, w0 }
    }

    fn n(&self) -> f64 {
        self.x.cols() as f64
    }
}

impl Problem for Mlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        self.widths.windows(2).map(|p| (p[1], p[0])).collect()
    }

    fn initial_params(&self) -> Vec<Matrix> {
        self.w0.clone()
    }

    fn loss(&self, params: &[Matrix]) -> Result<f64> {
        check_params(&self.shapes(), params, "mlp")?;
        let out = forward(params, &self.x)?.pop().expect("nonempty");
        Ok(0.5 * out.sub(&self.y)?.frobenius_norm_sq() / self.n())
    }

    fn gradients(&self, params: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(self.loss_and_gradients(params)?.1)
    }

    fn loss_and_gradients(&self, params: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
        check_params(&self.shapes(), params, "mlp")?;
        let acts = forward(params, &self.x)?;
        let depth = params.len();
        let resid = acts[depth].sub(&self.y)?;
        let loss = 0.5 * resid.frobenius_norm_sq() / self.n();

        let mut grads = vec![Matrix::zeros(1, 1); depth];
        let mut dz = resid.scale(1.0 / self.n());
        for l in (0..depth).rev() {
            grads[l] = dz.matmul(&acts[l].transpose())?;
            if l > 0 {
                let dh = params[l].transpose().matmul(&dz)?;
                let deriv = acts[l].map(|h| 1.0 - h * h);
                dz = dh.hadamard(&deriv)?;
            }
        }
        Ok((loss, grads))
    }

    fn activation_norms(&self, params: &[Matrix]) -> Result<Vec<f64>> {
        check_params(&self.shapes(), params, "mlp")?;
        let acts = forward(params, &self.x)?;
        Ok(acts[1..]
            .iter()
            .map(|h| h.frobenius_norm() / ((h.rows() * h.cols()) as f64).sqrt())
            .collect())
    }
}
