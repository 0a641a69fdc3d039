//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Relative asymmetry tolerated before a matrix is called non-symmetric.
const SYMMETRY_TOL: f64 = 1e-10;

pub(crate) fn check_finite_vec(v: &DVector<f64>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn check_finite_mat(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn check_len(v: &DVector<f64>, k: usize, what: &'static str) -> Result<()> {
    if v.len() == k {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected: k, found: v.len() })
    }
}

pub(crate) fn check_square(m: &DMatrix<f64>, k: usize, what: &'static str) -> Result<()> {
    if m.nrows() != k {
        return Err(Error::DimensionMismatch { what, expected: k, found: m.nrows() });
    }
    if m.ncols() != k {
        return Err(Error::DimensionMismatch { what, expected: k, found: m.ncols() });
    }
    Ok(())
}

/// `true` when `m` is square and symmetric to a relative tolerance.
pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    let k = m.nrows();
    (0..k).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= SYMMETRY_TOL * scale))
}

/// `(m + m') / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// 2-norm condition number via singular values; `inf` for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Spectral norm (largest singular value).
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Solve `m x = b` for symmetric positive definite `m`.
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().cholesky().map(|c| c.solve(b))
}

/// Inverse of a symmetric positive definite matrix.
pub fn inverse_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse())
}

/// Trace of `a * b` without forming the product.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let k = a.nrows();
    let mut s = 0.0;
    for i in 0..k {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Columns of `a` selected by `idx`, in order.
pub fn select_columns(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), idx.len(), |i, j| a[(i, idx[j])])
}

/// Validate a covariance-like matrix: square, symmetric, PSD up to `-1e-10`.
pub fn check_covariance(sigma: &DMatrix<f64>, k: usize) -> Result<()> {
    check_square(sigma, k, "sigma")?;
    check_finite_mat(sigma, "sigma")?;
    if !is_symmetric(sigma) {
        return Err(Error::NotSymmetric("sigma"));
    }
    let min_eig = min_eigenvalue(sigma);
    if min_eig < -1e-10 {
        return Err(Error::NotPositiveDefinite { what: "sigma", min_eigenvalue: min_eig });
    }
    Ok(())
}
