//! Seeded random matrices. All randomness in the crate goes through
//! `Xoshiro256StarStar` seeded with `seed_from_u64` (SplitMix64 expansion),
//! and Gaussian draws use `rand_distr::StandardNormal`.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256StarStar;

use crate::linalg::{exp_cayley, Matrix};

pub type Prng = Xoshiro256StarStar;

pub fn prng(seed: u64) -> Prng {
    Xoshiro256StarStar::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut Prng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        scale * z
    })
}

/// Random skew-symmetric matrix with Gaussian upper triangle.
pub fn skew(n: usize, scale: f64, rng: &mut Prng) -> Matrix {
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let z: f64 = rng.sample(StandardNormal);
            s.set(i, j, scale * z);
            s.set(j, i, -scale * z);
        }
    }
    s
}

/// Random orthogonal matrix, the Cayley image of a random skew matrix.
pub fn orthogonal(n: usize, rng: &mut Prng) -> Matrix {
    let s = skew(n, 2.0 / (n as f64).sqrt(), rng);
    exp_cayley(&s).expect("I - S/2 is invertible for skew S")
}

/// `U diag(σ) Vᵀ` with random orthogonal `U` (d_out×d_out) and `V` (d_in×d_in).
/// `sigma` must have `min(d_out, d_in)` entries.
pub fn with_singular_values(d_out: usize, d_in: usize, sigma: &[f64], rng: &mut Prng) -> Matrix {
    assert_eq!(sigma.len(), d_out.min(d_in));
    let u = orthogonal(d_out, rng);
    let v = orthogonal(d_in, rng);
    let core = Matrix::from_fn(d_out, d_in, |i, j| if i == j { sigma[i] } else { 0.0 });
    u.matmul(&core)
        .and_then(|m| m.matmul(&v.transpose()))
        .expect("shapes agree by construction")
}

/// Distinct, nonzero singular values spread evenly over `(scale/2, scale]`.
pub fn distinct_spectrum(k: usize, scale: f64) -> Vec<f64> {
    (0..k).map(|i| scale * (1.0 - 0.5 * i as f64 / k as f64)).collect()
}

/// Initial weight satisfying the forward spectral condition
/// `‖W‖₂ = √(d_out/d_in)` with distinct singular values.
pub fn spectral_init(d_out: usize, d_in: usize, rng: &mut Prng) -> Matrix {
    let scale = (d_out as f64 / d_in as f64).sqrt();
    with_singular_values(d_out, d_in, &distinct_spectrum(d_out.min(d_in), scale), rng)
}
