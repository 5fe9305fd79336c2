//! Matrix-exponential surrogates for Lie-algebra elements, plus the
//! Newton–Schulz polar approximation used by the μP adapters and Muon-lite.

use super::{solve, Matrix};
use crate::error::{Error, Result};

/// Quintic Newton–Schulz coefficients `(a, b, c)` for `aX + b(XXᵀ)X + c(XXᵀ)²X`.
pub const NS_COEFFS: (f64, f64, f64) = (3.4445, -4.7750, 2.0315);
pub const NS_DEFAULT_ITERS: usize = 5;

fn require_square(a: &Matrix, op: &'static str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::shape(op, format!("{}x{} is not square", a.rows(), a.cols())))
    }
}

/// Truncated power series `Σ_{k=0}^{order} Aᵏ/k!`.
pub fn exp_taylor(a: &Matrix, order: usize) -> Result<Matrix> {
    require_square(a, "exp_taylor")?;
    if order == 0 {
        return Err(Error::Argument("exp_taylor order must be at least 1".into()));
    }
    let n = a.rows();
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=order {
        term = term.matmul(a)?.scale(1.0 / k as f64);
        sum.add_scaled_assign(1.0, &term)?;
    }
    Ok(sum)
}

/// Second-order surrogate `I + sA + ½(sA)²` with `s = η·α`.
pub fn exp_e2(a: &Matrix, eta_alpha: f64) -> Result<Matrix> {
    require_square(a, "exp_e2")?;
    let sa = a.scale(eta_alpha);
    let mut out = sa.matmul(&sa)?.scale(0.5);
    out.add_scaled_assign(1.0, &sa)?;
    for i in 0..a.rows() {
        let v = out.get(i, i);
        out.set(i, i, v + 1.0);
    }
    Ok(out)
}

/// Cayley transform `(I − A/2)⁻¹ (I + A/2)`; orthogonal whenever `A` is skew.
pub fn exp_cayley(a: &Matrix) -> Result<Matrix> {
    require_square(a, "exp_cayley")?;
    let n = a.rows();
    let half = a.scale(0.5);
    let eye = Matrix::identity(n);
    let lhs = eye.sub(&half)?;
    let rhs = eye.add(&half)?;
    solve(&lhs, &rhs).map_err(|e| match e {
        Error::Singular { pivot, .. } => Error::Singular { op: "exp_cayley", pivot },
        other => other,
    })
}

/// Pushes the nonzero singular values of `a` toward one.
///
/// The input is scaled by its Frobenius norm first so every singular value
/// starts in `(0, 1]`. Odd polynomial in `a`, so skew inputs stay skew.
pub fn newton_schulz_orthogonalize(a: &Matrix, iters: usize) -> Result<Matrix> {
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate {
            op: "newton_schulz_orthogonalize",
            detail: "zero matrix has no polar factor".into(),
        });
    }
    let (ca, cb, cc) = NS_COEFFS;
    // iterate on the wide orientation so the Gram matrix is the small one
    let transposed = a.rows() > a.cols();
    let mut x = if transposed { a.transpose() } else { a.clone() }.scale(1.0 / norm);
    for _ in 0..iters {
        let gram = x.matmul(&x.transpose())?;
        let mut poly = gram.matmul(&gram)?.scale(cc);
        poly.add_scaled_assign(cb, &gram)?;
        let mut next = poly.matmul(&x)?;
        next.add_scaled_assign(ca, &x)?;
        x = next;
    }
    Ok(if transposed { x.transpose() } else { x })
}
