//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `lhs * X = rhs` for a symmetric positive-definite `lhs` via Cholesky.
pub fn spd_solve(lhs: DMatrix<f64>, rhs: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = lhs
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what}: system is not positive definite")))?;
    Ok(chol.solve(rhs))
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn all_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Adds `value` to every diagonal entry.
pub fn add_diagonal(m: &mut DMatrix<f64>, value: f64) {
    let n = m.nrows().min(m.ncols());
    for i in 0..n {
        m[(i, i)] += value;
    }
}
