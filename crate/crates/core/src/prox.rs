//! The proximal displacement `g^lambda(theta) = argmin_g 1/2 ||g||^2 + lambda pi(theta + g)`.
//!
//! Ridge has the closed form `g = C_lambda theta`. For Lasso we solve
//! `h = argmin_h 1/2 ||A h - theta||^2 + lambda ||h||_1` by cyclic coordinate
//! descent on the normal equations, confirm the active set by an exact
//! restricted solve, and return `g = A h - theta`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{check_finite_vec, check_len, select_columns};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::{Error, Result};

/// `|h_j|` at or below this is treated as exactly zero when reading signs.
pub const SIGN_TOL: f64 = 1e-9;
/// Distance to a kink below which `boundary` is raised.
pub const BOUNDARY_TOL: f64 = 1e-7;
/// KKT residual target for the Lasso subproblem (relative to `max(1, ||A'theta||_inf)`).
pub const KKT_TOL: f64 = 1e-10;
/// Coordinate-descent sweep budget.
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

const POLISH_EVERY: usize = 5;

/// Output of [`prox`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    /// Displacement `g^lambda(theta)`.
    pub g: DVector<f64>,
    /// Shrunk point `theta + g`.
    pub fitted: DVector<f64>,
    /// `A^{-1} fitted`; for Lasso the coefficient vector of the subproblem.
    pub h: DVector<f64>,
    /// Signs of `h` (`0` for Ridge by convention).
    pub eta: Vec<i8>,
    /// Active coordinates. All coordinates for Ridge.
    pub active_set: Vec<usize>,
    /// Jacobian `grad g^lambda(theta)`.
    pub grad_g: DMatrix<f64>,
    /// Raised when `theta` sits within [`BOUNDARY_TOL`] of a kink of `g^lambda`.
    pub boundary: bool,
    /// Final KKT residual (zero for Ridge).
    pub kkt_residual: f64,
}

/// Lasso subproblem solution.
#[derive(Debug, Clone)]
pub struct LassoSolution {
    /// Coefficients `h`.
    pub h: DVector<f64>,
    /// Coordinate-descent sweeps used.
    pub sweeps: usize,
    /// KKT residual at `h`.
    pub kkt_residual: f64,
}

/// Evaluate `g^lambda(theta)` and its Jacobian.
pub fn prox(penalty: &PenaltySpec, lambda: f64, theta: &DVector<f64>) -> Result<ProxResult> {
    prox_warm(penalty, lambda, theta, None)
}

/// [`prox`] with an optional Lasso warm start `h0` (ignored for Ridge).
pub fn prox_warm(
    penalty: &PenaltySpec,
    lambda: f64,
    theta: &DVector<f64>,
    h0: Option<&DVector<f64>>,
) -> Result<ProxResult> {
    check_lambda(lambda)?;
    check_len(theta, penalty.dim(), "theta")?;
    check_finite_vec(theta, "theta")?;
    let k = penalty.dim();
    match penalty.kind() {
        PenaltyKind::Ridge => {
            let c = penalty.ridge_shrinkage_matrix(lambda)?;
            let g = if lambda == 0.0 { DVector::zeros(k) } else { &c * theta };
            let fitted = theta + &g;
            let h = penalty.a_inverse() * &fitted;
            Ok(ProxResult {
                g,
                fitted,
                h,
                eta: vec![0; k],
                active_set: (0..k).collect(),
                grad_g: c,
                boundary: false,
                kkt_residual: 0.0,
            })
        }
        PenaltyKind::Lasso => {
            let sol = lasso_coefficients(penalty, lambda, theta, h0, DEFAULT_MAX_SWEEPS)?;
            Ok(lasso_result(penalty, lambda, theta, sol))
        }
    }
}

fn lasso_result(penalty: &PenaltySpec, lambda: f64, theta: &DVector<f64>, sol: LassoSolution) -> ProxResult {
    let k = penalty.dim();
    let h = sol.h;
    let fitted = if lambda == 0.0 { theta.clone() } else { penalty.a() * &h };
    let g = if lambda == 0.0 { DVector::zeros(k) } else { &fitted - theta };
    let eta = signs(&h);
    let active_set: Vec<usize> = (0..k).filter(|&j| eta[j] != 0).collect();
    let boundary = lambda > 0.0 && {
        let c = penalty.a().transpose() * theta;
        let r = &c - penalty.gram() * &h;
        (0..k).any(|j| {
            if eta[j] != 0 {
                h[j].abs() <= BOUNDARY_TOL
            } else {
                lambda - r[j].abs() <= BOUNDARY_TOL * lambda.max(1.0)
            }
        })
    };
    let grad_g = if lambda == 0.0 {
        DMatrix::zeros(k, k)
    } else {
        active_set_gradient(penalty.a(), &active_set)
    };
    ProxResult { g, fitted, h, eta, active_set, grad_g, boundary, kkt_residual: sol.kkt_residual }
}

/// Jacobian of `g^lambda` given a [`ProxResult`] computed at the same
/// `(penalty, lambda, theta)`. For Lasso this is
/// `A_J (A_J'A_J)^{-1} A_J' - I` from the active set; when `boundary` is set
/// the value is still the active-set formula and callers must treat it as a
/// one-sided quantity.
pub fn grad_g(
    penalty: &PenaltySpec,
    lambda: f64,
    theta: &DVector<f64>,
    prox: &ProxResult,
) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    check_len(theta, penalty.dim(), "theta")?;
    check_len(&prox.g, penalty.dim(), "prox result")?;
    let k = penalty.dim();
    if lambda == 0.0 {
        return Ok(DMatrix::zeros(k, k));
    }
    match penalty.kind() {
        PenaltyKind::Ridge => penalty.ridge_shrinkage_matrix(lambda),
        PenaltyKind::Lasso => Ok(active_set_gradient(penalty.a(), &prox.active_set)),
    }
}

/// `A_J (A_J'A_J)^{-1} A_J' - I`, i.e. minus the projection onto the
/// orthogonal complement of the span of the active columns.
pub fn active_set_gradient(a: &DMatrix<f64>, active: &[usize]) -> DMatrix<f64> {
    let k = a.nrows();
    let mut out = -DMatrix::<f64>::identity(k, k);
    if active.is_empty() {
        return out;
    }
    let aj = select_columns(a, active);
    let gram = aj.transpose() * &aj;
    let chol = gram
        .cholesky()
        .expect("A_J'A_J is positive definite for invertible A and |J| <= k");
    let proj = &aj * chol.solve(&aj.transpose());
    out += proj;
    out
}

/// Signs with `|x| <= SIGN_TOL` mapped to zero.
pub fn signs(h: &DVector<f64>) -> Vec<i8> {
    h.iter()
        .map(|&x| if x > SIGN_TOL { 1 } else if x < -SIGN_TOL { -1 } else { 0 })
        .collect()
}

/// KKT residual of `h` for `min 1/2 ||A h - theta||^2 + lambda ||h||_1`
/// written via `gram = A'A` and `c = A'theta`.
pub fn lasso_kkt_residual(gram: &DMatrix<f64>, c: &DVector<f64>, h: &DVector<f64>, lambda: f64) -> f64 {
    let r = c - gram * h;
    let mut worst = 0.0f64;
    for j in 0..h.len() {
        let v = if h[j] != 0.0 {
            (r[j] - lambda * h[j].signum()).abs()
        } else {
            (r[j].abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Solve the Lasso subproblem `h^lambda(theta)`.
pub fn lasso_coefficients(
    penalty: &PenaltySpec,
    lambda: f64,
    theta: &DVector<f64>,
    h0: Option<&DVector<f64>>,
    max_sweeps: usize,
) -> Result<LassoSolution> {
    if penalty.kind() != PenaltyKind::Lasso {
        return Err(Error::WrongPenalty("lasso subproblem needs a Lasso penalty"));
    }
    check_lambda(lambda)?;
    check_len(theta, penalty.dim(), "theta")?;
    check_finite_vec(theta, "theta")?;
    let c = penalty.a().transpose() * theta;
    if lambda == 0.0 {
        let h = penalty.a_inverse() * theta;
        let kkt = lasso_kkt_residual(penalty.gram(), &c, &h, 0.0);
        return Ok(LassoSolution { h, sweeps: 0, kkt_residual: kkt });
    }
    lasso_quadratic(penalty.gram(), &c, lambda, h0, max_sweeps)
}

/// `argmin_h 1/2 h'Gh - c'h + lambda ||h||_1` for positive definite `G`, by
/// cyclic coordinate descent with exact polishing on the support. Converged
/// when the KKT residual is below `KKT_TOL * max(1, ||c||_inf)`.
pub fn lasso_quadratic(
    gram: &DMatrix<f64>,
    c: &DVector<f64>,
    lambda: f64,
    h0: Option<&DVector<f64>>,
    max_sweeps: usize,
) -> Result<LassoSolution> {
    check_lambda(lambda)?;
    check_finite_vec(c, "linear term")?;
    let k = c.len();
    let tol = KKT_TOL * c.amax().max(1.0);

    if lambda == 0.0 {
        let h = gram
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { what: "lasso Gram matrix", min_eigenvalue: f64::NAN })?
            .solve(c);
        let kkt = lasso_kkt_residual(gram, c, &h, 0.0);
        return Ok(LassoSolution { h, sweeps: 0, kkt_residual: kkt });
    }
    if lambda >= c.amax() {
        return Ok(LassoSolution { h: DVector::zeros(k), sweeps: 0, kkt_residual: 0.0 });
    }

    let mut h = match h0 {
        Some(w) => {
            check_len(w, k, "warm start")?;
            w.clone()
        }
        None => DVector::zeros(k),
    };
    if let Some(sol) = polish(gram, c, &h, lambda, tol) {
        let kkt = lasso_kkt_residual(gram, c, &sol, lambda);
        return Ok(LassoSolution { h: sol, sweeps: 0, kkt_residual: kkt });
    }
    let mut r = c - gram * &h;
    for sweep in 1..=max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..k {
            let gjj = gram[(j, j)];
            let z = r[j] + gjj * h[j];
            let new = soft_threshold(z, lambda) / gjj;
            let delta = new - h[j];
            if delta != 0.0 {
                for i in 0..k {
                    r[i] -= gram[(i, j)] * delta;
                }
                h[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if sweep % POLISH_EVERY == 0 || max_delta < 1e-13 {
            if let Some(sol) = polish(gram, c, &h, lambda, tol) {
                let kkt = lasso_kkt_residual(gram, c, &sol, lambda);
                return Ok(LassoSolution { h: sol, sweeps: sweep, kkt_residual: kkt });
            }
            let kkt = lasso_kkt_residual(gram, c, &h, lambda);
            if kkt <= tol {
                return Ok(LassoSolution { h, sweeps: sweep, kkt_residual: kkt });
            }
        }
    }
    Err(Error::NoConvergence {
        what: "lasso coordinate descent",
        iterations: max_sweeps,
        residual: lasso_kkt_residual(gram, c, &h, lambda),
    })
}

/// Exact solve on the current support; accepted only if signs are
/// reproduced and the full KKT system holds.
fn polish(gram: &DMatrix<f64>, c: &DVector<f64>, h: &DVector<f64>, lambda: f64, tol: f64) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..h.len()).filter(|&j| h[j] != 0.0).collect();
    let mut out = DVector::zeros(h.len());
    if !support.is_empty() {
        let m = support.len();
        let gs = DMatrix::from_fn(m, m, |a, b| gram[(support[a], support[b])]);
        let rhs = DVector::from_fn(m, |a, _| c[support[a]] - lambda * h[support[a]].signum());
        let sol = gs.cholesky()?.solve(&rhs);
        for (a, &j) in support.iter().enumerate() {
            if sol[a] == 0.0 || sol[a].signum() != h[j].signum() {
                return None;
            }
            out[j] = sol[a];
        }
    }
    if lasso_kkt_residual(gram, c, &out, lambda) <= tol {
        Some(out)
    } else {
        None
    }
}

/// `sign(z) * max(|z| - t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::NonFinite("lambda"));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(alloc::format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn ridge_scalar_closed_form() {
        let p = PenaltySpec::ridge_identity(1).unwrap();
        let r = prox(&p, 1.0, &v(&[2.0])).unwrap();
        assert!((r.g[0] + 1.0).abs() < 1e-15);
        assert!((r.fitted[0] - 1.0).abs() < 1e-15);
        assert_eq!(r.eta, vec![0]);
        assert_eq!(r.active_set, vec![0]);
    }

    #[test]
    fn lasso_orthogonal_is_soft_thresholding() {
        let p = PenaltySpec::lasso_identity(3).unwrap();
        let r = prox(&p, 1.0, &v(&[3.0, 0.5, -2.0])).unwrap();
        assert!((&r.h - v(&[2.0, 0.0, -1.0])).amax() < 1e-12);
        assert_eq!(r.eta, vec![1, 0, -1]);
        assert_eq!(r.active_set, vec![0, 2]);
        let expected = DMatrix::from_diagonal(&v(&[0.0, -1.0, 0.0]));
        assert!((&r.grad_g - expected).amax() < 1e-14);
        assert!(!r.boundary);
    }

    #[test]
    fn zero_lambda_is_identity_map() {
        let t = v(&[0.3, -1.2]);
        for p in [PenaltySpec::ridge_identity(2).unwrap(), PenaltySpec::lasso_identity(2).unwrap()] {
            let r = prox(&p, 0.0, &t).unwrap();
            assert_eq!(r.g, DVector::zeros(2));
            assert_eq!(r.fitted, t);
            assert_eq!(r.grad_g, DMatrix::zeros(2, 2));
        }
    }

    #[test]
    fn ridge_gradient_diagonal() {
        let p = PenaltySpec::ridge(DMatrix::from_diagonal(&v(&[1.0, 40.0]))).unwrap();
        let t = v(&[1.0, 1.0]);
        let r = prox(&p, 1.0, &t).unwrap();
        let gg = grad_g(&p, 1.0, &t, &r).unwrap();
        assert!((gg[(0, 0)] + 0.5).abs() < 1e-15);
        assert!((gg[(1, 1)] + 1.0 / 41.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = PenaltySpec::lasso_identity(2).unwrap();
        assert!(matches!(prox(&p, -1.0, &v(&[1.0, 1.0])), Err(Error::InvalidArgument(_))));
        assert!(matches!(prox(&p, 1.0, &v(&[f64::NAN, 1.0])), Err(Error::NonFinite(_))));
        assert!(matches!(prox(&p, f64::INFINITY, &v(&[1.0, 1.0])), Err(Error::NonFinite(_))));
        assert!(matches!(prox(&p, 1.0, &v(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn boundary_flag_at_kink() {
        let p = PenaltySpec::lasso_identity(2).unwrap();
        let r = prox(&p, 1.0, &v(&[1.0, 3.0])).unwrap();
        assert!(r.boundary);
        let r = prox(&p, 1.0, &v(&[1.5, 3.0])).unwrap();
        assert!(!r.boundary);
    }

    #[test]
    fn lasso_above_lambda_max_is_zero() {
        let p = PenaltySpec::lasso(DMatrix::from_row_slice(1, 1, &[2.0])).unwrap();
        let r = prox(&p, 2.5, &v(&[1.0])).unwrap();
        assert_eq!(r.h[0], 0.0);
        assert!((r.g[0] + 1.0).abs() < 1e-15);
        assert!((r.grad_g[(0, 0)] + 1.0).abs() < 1e-15);
        let r = prox(&p, 1.0, &v(&[1.0])).unwrap();
        // h = (2*1 - 1)/4
        assert!((r.h[0] - 0.25).abs() < 1e-14);
    }
}
