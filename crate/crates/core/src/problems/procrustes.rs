use super::{check_params, Problem};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::random;

/// `f(W) = ½‖W − Q·W₀·Pᵀ‖_F²`. The target sits on the isospectral manifold
/// of `W₀`, whose singular values are `1, 2, …, d`.
#[derive(Clone, Debug)]
pub struct Procrustes {
    pub w0: Matrix,
    pub target: Matrix,
}

/// Draw order from `prng(seed)`: the two conjugating rotations of `W₀`,
/// then `Q`, then `P`.
pub fn procrustes(d: usize, seed: u64) -> Procrustes {
    assert!(d >= 2, "procrustes needs d >= 2");
    let mut rng = random::prng(seed);
    let sigma: Vec<f64> = (1..=d).rev().map(|k| k as f64).collect();
    let w0 = random::with_singular_values(d, d, &sigma, &mut rng);
    let q = random::orthogonal(d, &mut rng);
    let p = random::orthogonal(d, &mut rng);
    let target = q
        .matmul(&w0)
        .and_then(|m| m.matmul(&p.transpose()))
        .expect("square shapes");
    Procrustes { w0, target }
}

impl Problem for Procrustes {
    fn name(&self) -> &str {
        "procrustes"
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![self.w0.shape()]
    }

    fn initial_params(&self) -> Vec<Matrix> {
        vec![self.w0.clone()]
    }

    fn loss(&self, params: &[Matrix]) -> Result<f64> {
        check_params(&self.shapes(), params, "procrustes")?;
        Ok(0.5 * params[0].sub(&self.target)?.frobenius_norm_sq())
    }

    fn gradients(&self, params: &[Matrix]) -> Result<Vec<Matrix>> {
        check_params(&self.shapes(), params, "procrustes")?;
        Ok(vec![params[0].sub(&self.target)?])
    }

    fn optimum_hint(&self) -> Option<f64> {
        Some(0.0)
    }
}
