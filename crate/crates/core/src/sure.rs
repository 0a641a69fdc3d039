//! Stein's unbiased risk estimate for the shrinkage estimator
//! `theta_hat + g^lambda(theta_hat)` in the normal-means model:
//!
//! `SURE(lambda, theta, Sigma) = tr(Sigma) + ||g||^2 + 2 tr(grad g * Sigma)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{check_covariance, check_finite_vec, check_len, select_columns, trace_of_product};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::prox::{active_set_gradient, prox, signs, ProxResult};
use crate::{Error, Result};

/// Relative offset used to read the active set just above a kink.
pub const RIGHT_LIMIT_OFFSET: f64 = 1e-12;

/// SURE over a grid of `lambda` values.
#[derive(Debug, Clone)]
pub struct SureCurve {
    /// Strictly increasing, non-negative.
    pub lambdas: Vec<f64>,
    /// SURE at each `lambda` (right limits at Lasso kinks).
    pub values: Vec<f64>,
    /// Penalty family the curve was computed for.
    pub kind: PenaltyKind,
    /// The point `theta_hat`.
    pub theta: DVector<f64>,
    /// The covariance `Sigma`.
    pub sigma: DMatrix<f64>,
}

impl SureCurve {
    /// Indices of grid-local minima (endpoints compare with their single neighbour).
    pub fn local_minima(&self) -> Vec<usize> {
        grid_local_minima(&self.values)
    }
}

/// Polar coordinates `theta = r * nu` with `||nu|| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionCoords {
    /// Radius `||theta||`.
    pub r: f64,
    /// Unit direction.
    pub nu: DVector<f64>,
}

impl DirectionCoords {
    /// Split `theta` into radius and direction. For `theta = 0` the direction
    /// is the first basis vector.
    pub fn from_theta(theta: &DVector<f64>) -> Self {
        let r = theta.norm();
        if r == 0.0 {
            let mut nu = DVector::zeros(theta.len());
            if !nu.is_empty() {
                nu[0] = 1.0;
            }
            return Self { r, nu };
        }
        Self { r, nu: theta / r }
    }

    /// Unit-normalise `nu`; fails for the zero vector.
    pub fn unit(nu: &DVector<f64>) -> Result<DVector<f64>> {
        let n = nu.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument("direction must be a non-zero finite vector".into()));
        }
        Ok(nu / n)
    }

    /// `r * nu`.
    pub fn theta(&self) -> DVector<f64> {
        &self.nu * self.r
    }
}

/// SURE from an already computed proximal result.
pub fn sure_from_prox(prox: &ProxResult, sigma: &DMatrix<f64>) -> f64 {
    sigma.trace() + prox.g.norm_squared() + 2.0 * trace_of_product(&prox.grad_g, sigma)
}

/// `SURE(lambda, theta, Sigma)`. At a Lasso kink the right-limit value is
/// returned: the active set is read at `lambda (1 + 1e-12)` and the
/// segment formula is evaluated at `lambda` itself.
pub fn sure(penalty: &PenaltySpec, lambda: f64, theta: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    check_covariance(sigma, penalty.dim())?;
    sure_unchecked(penalty, lambda, theta, sigma)
}

pub(crate) fn sure_unchecked(
    penalty: &PenaltySpec,
    lambda: f64,
    theta: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    let p = prox(penalty, lambda, theta)?;
    if !p.boundary {
        return Ok(sure_from_prox(&p, sigma));
    }
    let above = prox(penalty, lambda * (1.0 + RIGHT_LIMIT_OFFSET), theta)?;
    let eta = signs(&above.h);
    Ok(segment_sure(penalty, lambda, theta, sigma, &eta))
}

/// SURE evaluated with the sign pattern `eta` held fixed, i.e. the
/// continuation of one Lasso segment to `lambda`.
pub fn segment_sure(
    penalty: &PenaltySpec,
    lambda: f64,
    theta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    eta: &[i8],
) -> f64 {
    let (g, grad) = segment_displacement(penalty, lambda, theta, eta);
    sigma.trace() + g.norm_squared() + 2.0 * trace_of_product(&grad, sigma)
}

/// `g` and `grad g` on the segment with sign pattern `eta`:
/// `h_J = (A_J'A_J)^{-1}(A_J'theta - lambda eta_J)`, `g = A_J h_J - theta`.
pub fn segment_displacement(
    penalty: &PenaltySpec,
    lambda: f64,
    theta: &DVector<f64>,
    eta: &[i8],
) -> (DVector<f64>, DMatrix<f64>) {
    let active: Vec<usize> = (0..eta.len()).filter(|&j| eta[j] != 0).collect();
    let grad = active_set_gradient(penalty.a(), &active);
    if active.is_empty() {
        return (-theta, grad);
    }
    let aj = select_columns(penalty.a(), &active);
    let gram = aj.transpose() * &aj;
    let eta_j = DVector::from_iterator(active.len(), active.iter().map(|&j| eta[j] as f64));
    let rhs = aj.transpose() * theta - eta_j * lambda;
    let hj = gram
        .cholesky()
        .expect("A_J'A_J is positive definite for invertible A")
        .solve(&rhs);
    (&aj * hj - theta, grad)
}

/// Ridge SURE in the eigenbasis of `A`, for repeated evaluation over `lambda`:
/// `tr(Sigma) + sum_j w_j^2 z_j^2 - 2 sum_j w_j s_jj` with
/// `w_j = lambda / (d_j + lambda)`, `z = Q'theta`, `s = diag(Q' Sigma Q)`.
#[derive(Debug, Clone)]
pub struct RidgeSure {
    trace: f64,
    d: DVector<f64>,
    z2: DVector<f64>,
    s: DVector<f64>,
}

impl RidgeSure {
    /// Precompute for a Ridge penalty.
    pub fn new(penalty: &PenaltySpec, theta: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<Self> {
        if penalty.kind() != PenaltyKind::Ridge {
            return Err(Error::WrongPenalty("RidgeSure needs a Ridge penalty"));
        }
        check_covariance(sigma, penalty.dim())?;
        check_len(theta, penalty.dim(), "theta")?;
        check_finite_vec(theta, "theta")?;
        let (q, d) = penalty.ridge_eigen();
        let z = q.transpose() * theta;
        let qsq = q.transpose() * sigma * q;
        Ok(Self { trace: sigma.trace(), d: d.clone(), z2: z.map(|x| x * x), s: qsq.diagonal() })
    }

    /// SURE at `lambda` (`lambda = inf` gives the full-shrinkage limit).
    pub fn eval(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return self.trace;
        }
        let mut out = self.trace;
        for j in 0..self.d.len() {
            let w = if lambda.is_infinite() { 1.0 } else { lambda / (self.d[j] + lambda) };
            out += w * w * self.z2[j] - 2.0 * w * self.s[j];
        }
        out
    }
}

/// SURE on a strictly increasing grid of non-negative `lambda`.
pub fn sure_curve(
    penalty: &PenaltySpec,
    theta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    lambdas: &[f64],
) -> Result<SureCurve> {
    check_covariance(sigma, penalty.dim())?;
    check_len(theta, penalty.dim(), "theta")?;
    check_finite_vec(theta, "theta")?;
    check_grid(lambdas)?;
    let values = lambdas
        .iter()
        .map(|&l| sure_unchecked(penalty, l, theta, sigma))
        .collect::<Result<Vec<_>>>()?;
    Ok(SureCurve {
        lambdas: lambdas.to_vec(),
        values,
        kind: penalty.kind(),
        theta: theta.clone(),
        sigma: sigma.clone(),
    })
}

/// Reject empty, negative, non-finite or non-increasing grids.
pub fn check_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    if let Some(bad) = lambdas.iter().find(|l| !l.is_finite() || **l < 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "lambda grid entries must be finite and >= 0, got {bad}"
        )));
    }
    if let Some(w) = lambdas.windows(2).find(|w| w[1] <= w[0]) {
        let msg = if w[1] == w[0] {
            alloc::format!("duplicate lambda {} in grid", w[0])
        } else {
            alloc::format!("lambda grid must be increasing ({} then {})", w[0], w[1])
        };
        return Err(Error::InvalidArgument(msg));
    }
    Ok(())
}

pub(crate) fn grid_local_minima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let left = i == 0 || values[i] <= values[i - 1];
            let right = i + 1 == n || values[i] <= values[i + 1];
            // flat runs count once, at their left end
            let fresh = i == 0 || values[i] < values[i - 1];
            left && right && fresh
        })
        .collect()
}
