use std::fmt::Write as _;

use pion_core::linalg::singular_values;
use pion_core::{Matrix, Result};

/// Reads `rows,cols` on the first non-blank line, then `rows·cols` values
/// separated by commas or whitespace.
pub fn parse_matrix(text: &str) -> std::result::Result<Matrix, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("empty file")?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    let [r, c] = dims.as_slice() else {
        return Err(format!("header must be `rows,cols`, got `{}`", header.trim()));
    };
    let rows: usize = r.parse().map_err(|_| format!("bad row count `{r}`"))?;
    let cols: usize = c.parse().map_err(|_| format!("bad column count `{c}`"))?;
    if rows == 0 || cols == 0 {
        return Err("matrix dimensions must be positive".into());
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (no, line) in lines {
        for tok in line.split(|ch: char| ch == ',' || ch.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok.parse().map_err(|_| format!("line {}: bad value `{tok}`", no + 1))?;
            if !v.is_finite() {
                return Err(format!("line {}: non-finite value `{tok}`", no + 1));
            }
            data.push(v);
        }
    }
    if data.len() != rows * cols {
        return Err(format!("expected {} values for {rows}x{cols}, found {}", rows * cols, data.len()));
    }
    Matrix::new(rows, cols, data).map_err(|e| e.to_string())
}

pub fn report(m: &Matrix) -> Result<String> {
    let sv = singular_values(m)?;
    let (rows, cols) = m.shape();
    let gram = if rows >= cols { m.transpose().matmul(m)? } else { m.matmul(&m.transpose())? };
    let ortho = gram.max_abs_diff(&Matrix::identity(gram.rows()))?;
    let smallest = *sv.last().expect("positive dimensions");

    let mut out = String::new();
    let _ = writeln!(out, "shape {rows}x{cols}");
    let _ = writeln!(
        out,
        "singular_values {}",
        sv.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(out, "spectral_norm {}", sv[0]);
    let _ = writeln!(out, "frobenius_norm {}", m.frobenius_norm());
    let _ = writeln!(out, "condition_number {}", sv[0] / smallest);
    let _ = writeln!(out, "orthogonality_error {ortho}");
    if m.is_square() {
        let _ = writeln!(out, "skew_error {}", m.skew_error()?);
        let sym = m.sub(&m.transpose())?.frobenius_norm() / m.frobenius_norm().max(f64::MIN_POSITIVE);
        let _ = writeln!(out, "relative_asymmetry {sym}");
    }
    Ok(out)
}
