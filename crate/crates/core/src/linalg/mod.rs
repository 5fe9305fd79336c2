//! Dense row-major `f64` matrices and the kernels the optimizers are built on.
//!
//! Everything here is a pure function of its inputs. Shapes are checked on
//! every binary operation and reported through [`Error::Shape`].

mod decomp;
mod expm;

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use decomp::{singular_values, solve, spectral_norm, SPECTRAL_NORM_ITERS, SPECTRAL_NORM_TOL};
pub use expm::{
    exp_cayley, exp_e2, exp_taylor, newton_schulz_orthogonalize, NS_COEFFS, NS_DEFAULT_ITERS,
};

/// Products with at least this many multiply-adds are split across rows.
const PAR_MATMUL_THRESHOLD: usize = 1 << 18;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape("Matrix::new", format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::new",
                format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from row slices. Panics on ragged or empty input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        assert!(!rows.is_empty() && !rows[0].is_empty(), "empty matrix literal");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged matrix literal");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        let row_kernel = |(i, out_row): (usize, &mut [f64])| {
            let a_row = &self.data[i * k..(i + 1) * k];
            for (p, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        if n * k * m >= PAR_MATMUL_THRESHOLD && n > 1 {
            out.par_chunks_mut(m).enumerate().for_each(row_kernel);
        } else {
            out.chunks_mut(m).enumerate().for_each(row_kernel);
        }
        Ok(Matrix {
            rows: n,
            cols: m,
            data: out,
        })
    }

    fn check_same_shape(&self, other: &Matrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{}x{} vs {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        self.check_same_shape(other, op)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    /// `self <- self + s * other`.
    pub fn add_scaled_assign(&mut self, s: f64, other: &Matrix) -> Result<()> {
        self.check_same_shape(other, "add_scaled_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// Exponential moving average in place: `self <- beta * self + (1 - beta) * x`.
    pub fn ema_assign(&mut self, beta: f64, x: &Matrix) -> Result<()> {
        self.check_same_shape(x, "ema_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&x.data) {
            *a = beta * *a + (1.0 - beta) * b;
        }
        Ok(())
    }

    /// Frobenius inner product `tr(selfᵀ other)`.
    pub fn dot(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `‖A + Aᵀ‖_F`, zero exactly when `A` is skew-symmetric.
    pub fn skew_error(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::shape("skew_error", format!("{}x{} is not square", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s = self.data[i * n + j] + self.data[j * n + i];
                acc += s * s;
            }
        }
        Ok(acc.sqrt())
    }

    /// `m / (sqrt(v) + eps)` entrywise, the adaptive preconditioning map.
    pub fn elem_div_sqrt_eps(m: &Matrix, v: &Matrix, eps: f64) -> Result<Matrix> {
        m.check_same_shape(v, "elem_div_sqrt_eps")?;
        if let Some(bad) = v.data.iter().find(|&&x| x < 0.0 || x.is_nan()) {
            return Err(Error::Domain {
                op: "elem_div_sqrt_eps",
                detail: format!("second moment entry {bad} is negative"),
            });
        }
        Ok(Matrix {
            rows: m.rows,
            cols: m.cols,
            data: m
                .data
                .iter()
                .zip(&v.data)
                .map(|(&a, &b)| if a == 0.0 { 0.0 } else { a / (b.sqrt() + eps) })
                .collect(),
        })
    }

    /// Largest absolute entry difference; handy in tests.
    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for v in self.row(i) {
                write!(f, "{v:>12.6} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

pub fn frobenius_norm(a: &Matrix) -> f64 {
    a.frobenius_norm()
}

pub fn skew_error(a: &Matrix) -> Result<f64> {
    a.skew_error()
}

pub fn elem_div_sqrt_eps(m: &Matrix, v: &Matrix, eps: f64) -> Result<Matrix> {
    Matrix::elem_div_sqrt_eps(m, v, eps)
}
