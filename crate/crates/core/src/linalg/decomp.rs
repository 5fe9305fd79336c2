use super::Matrix;
use crate::error::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-300;
const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

pub const SPECTRAL_NORM_ITERS: usize = 50;
pub const SPECTRAL_NORM_TOL: f64 = 1e-8;

/// Solves `A X = B` by LU factorization with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::shape("solve", format!("{}x{} is not square", a.rows(), a.cols())));
    }
    if b.rows() != a.rows() {
        return Err(Error::shape(
            "solve",
            format!("rhs has {} rows, system has {}", b.rows(), a.rows()),
        ));
    }
    let n = a.rows();
    let m = b.cols();
    let mut lu = a.as_slice().to_vec();
    let mut x = b.as_slice().to_vec();

    for k in 0..n {
        let (piv, piv_abs) = (k..n)
            .map(|i| (i, lu[i * n + k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(piv_abs >= PIVOT_FLOOR) {
            return Err(Error::Singular { op: "solve", pivot: piv_abs });
        }
        if piv != k {
            for j in 0..n {
                lu.swap(k * n + j, piv * n + j);
            }
            for j in 0..m {
                x.swap(k * m + j, piv * m + j);
            }
        }
        let d = lu[k * n + k];
        for i in k + 1..n {
            let f = lu[i * n + k] / d;
            if f == 0.0 {
                continue;
            }
            lu[i * n + k] = f;
            for j in k + 1..n {
                lu[i * n + j] -= f * lu[k * n + j];
            }
            for j in 0..m {
                x[i * m + j] -= f * x[k * m + j];
            }
        }
    }
    for k in (0..n).rev() {
        let d = lu[k * n + k];
        for j in 0..m {
            let mut s = x[k * m + j];
            for p in k + 1..n {
                s -= lu[k * n + p] * x[p * m + j];
            }
            x[k * m + j] = s / d;
        }
    }
    Matrix::new(n, m, x)
}

/// Singular values in descending order via cyclic one-sided Jacobi.
///
/// Columns of the (possibly transposed) input are orthogonalized pairwise
/// until every pair satisfies `|<a_p, a_q>| <= 1e-13 * ‖a_p‖‖a_q‖`.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    // work on the orientation with fewer columns; store columns contiguously
    let (m, n, cols_of) = if a.cols() <= a.rows() {
        (a.rows(), a.cols(), a.transpose())
    } else {
        (a.cols(), a.rows(), a.clone())
    };
    let mut cols = cols_of.into_vec();

    let mut norms2: Vec<f64> = (0..n)
        .map(|j| cols[j * m..(j + 1) * m].iter().map(|v| v * v).sum())
        .collect();

    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Convergence {
                op: "singular_values",
                iterations: JACOBI_MAX_SWEEPS,
            });
        }
        sweeps += 1;
        converged = true;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta) = (norms2[p], norms2[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let (head, tail) = cols.split_at_mut(q * m);
                let cp = &mut head[p * m..(p + 1) * m];
                let cq = &mut tail[..m];
                let gamma: f64 = cp.iter().zip(cq.iter()).map(|(x, y)| x * y).sum();
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (mut np, mut nq) = (0.0, 0.0);
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let xp = c * *x - s * *y;
                    let yq = s * *x + c * *y;
                    *x = xp;
                    *y = yq;
                    np += xp * xp;
                    nq += yq * yq;
                }
                norms2[p] = np;
                norms2[q] = nq;
            }
        }
    }
    let mut sv: Vec<f64> = norms2.iter().map(|v| v.sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Largest singular value by power iteration on `AᵀA`.
///
/// Starts from the normalized all-ones vector and stops after `iters`
/// iterations or when successive estimates agree to relative `tol`.
pub fn spectral_norm(a: &Matrix, iters: usize, tol: f64) -> f64 {
    let n = a.cols();
    let start = vec![1.0 / (n as f64).sqrt(); n];
    let est = power_iterate(a, start, iters.max(1), tol);
    if est > 0.0 || a.is_zero() {
        return est;
    }
    // all-ones start lies in the null space; restart on the heaviest column
    let at = a.transpose();
    let heaviest = (0..n)
        .max_by(|&i, &j| {
            let ni: f64 = at.row(i).iter().map(|v| v * v).sum();
            let nj: f64 = at.row(j).iter().map(|v| v * v).sum();
            ni.total_cmp(&nj)
        })
        .unwrap_or(0);
    let mut e = vec![0.0; n];
    e[heaviest] = 1.0;
    power_iterate(a, e, iters.max(1), tol)
}

fn power_iterate(a: &Matrix, mut v: Vec<f64>, iters: usize, tol: f64) -> f64 {
    let (rows, cols) = a.shape();
    let data = a.as_slice();
    let mut av = vec![0.0; rows];
    let mut sigma = 0.0;
    for _ in 0..iters {
        for i in 0..rows {
            av[i] = data[i * cols..(i + 1) * cols].iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        let next_sigma = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        if next_sigma == 0.0 {
            return 0.0;
        }
        // v <- Aᵀ A v, normalized
        v.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..rows {
            let w = av[i];
            for (x, &aij) in v.iter_mut().zip(&data[i * cols..(i + 1) * cols]) {
                *x += aij * w;
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv == 0.0 {
            return next_sigma;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let done = (next_sigma - sigma).abs() <= tol * next_sigma;
        sigma = next_sigma;
        if done {
            break;
        }
    }
    // Rayleigh-quotient estimate from the final direction
    for i in 0..rows {
        av[i] = data[i * cols..(i + 1) * cols].iter().zip(&v).map(|(x, y)| x * y).sum();
    }
    av.iter().map(|x| x * x).sum::<f64>().sqrt().max(sigma)
}
