//! Loss models and the finite-sample estimators: unpenalized and penalized
//! ERM, exact and one-Newton-step leave-one-out refits, and the
//! influence-function quantities `theta_tilde_n`, `X_n^i`, `Sigma_hat_n`.
//!
//! With `l_n(theta, z) = l(theta / sqrt(n), z)` and `L_n = sum_i l_n`, the
//! gradient of `L_n` in `theta` is `n^{-1/2} sum_i grad_beta l` and the
//! Hessian is `n^{-1} sum_i hess_beta l`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{check_finite_mat, check_finite_vec, check_len, min_eigenvalue, select_columns, symmetrize};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::prox::{check_lambda, lasso_quadratic, signs, DEFAULT_MAX_SWEEPS};
use crate::{Error, Result};

/// Smallest Hessian eigenvalue accepted for an unpenalized fit.
pub const MIN_HESSIAN_EIGENVALUE: f64 = 1e-8;
/// Gradient-norm target for Newton fits.
pub const NEWTON_TOL: f64 = 1e-10;
/// Composite-optimality target for Lasso fits.
pub const LASSO_FIT_TOL: f64 = 1e-9;
/// Newton / proximal-Newton iteration budget.
pub const MAX_NEWTON_ITER: usize = 200;

const ARMIJO: f64 = 1e-4;
const SM_SINGULAR: f64 = 1e-10;

/// Per-observation loss as a function of the linear index `u = w'beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossModel {
    /// `1/2 (y - u)^2`.
    LinearSquaredError,
    /// Logistic negative log-likelihood, `y` in `{0, 1}`.
    LogisticNll,
}

impl LossModel {
    /// `l` at index `u`.
    pub fn loss(self, u: f64, y: f64) -> f64 {
        match self {
            Self::LinearSquaredError => 0.5 * (y - u) * (y - u),
            Self::LogisticNll => softplus(u) - y * u,
        }
    }

    /// `dl/du`.
    pub fn dloss(self, u: f64, y: f64) -> f64 {
        match self {
            Self::LinearSquaredError => u - y,
            Self::LogisticNll => sigmoid(u) - y,
        }
    }

    /// `d^2 l / du^2`.
    pub fn d2loss(self, u: f64, _y: f64) -> f64 {
        match self {
            Self::LinearSquaredError => 1.0,
            Self::LogisticNll => {
                let p = sigmoid(u);
                p * (1.0 - p)
            }
        }
    }

    /// Whether `L_n` is exactly quadratic in `theta`.
    pub fn is_quadratic(self) -> bool {
        matches!(self, Self::LinearSquaredError)
    }
}

/// `log(1 + e^u)` without overflow.
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + libm::log1p(libm::exp(-u))
    } else {
        libm::log1p(libm::exp(u))
    }
}

/// Logistic function.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + libm::exp(-u))
    } else {
        let e = libm::exp(u);
        e / (1.0 + e)
    }
}

/// Observations `Z_i = (W_i, Y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    w: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    /// `w` is `n x k`, `y` has length `n`, and `n > k`.
    pub fn new(w: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        check_finite_mat(&w, "features")?;
        check_finite_vec(&y, "outcomes")?;
        check_len(&y, w.nrows(), "outcomes")?;
        if w.nrows() <= w.ncols() {
            return Err(Error::InvalidArgument(alloc::format!(
                "need n > k observations, got n = {} with k = {}",
                w.nrows(),
                w.ncols()
            )));
        }
        Ok(Self { w, y })
    }

    /// Sample size.
    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Feature dimension.
    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    /// Features.
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Outcomes.
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Rows reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut seen = alloc::vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || core::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the rows".into()));
        }
        let w = DMatrix::from_fn(n, self.k(), |i, j| self.w[(perm[i], j)]);
        let y = DVector::from_fn(n, |i, _| self.y[perm[i]]);
        Ok(Self { w, y })
    }

    fn check_model(&self, model: LossModel) -> Result<()> {
        if model == LossModel::LogisticNll && self.y.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidArgument("logistic outcomes must be 0 or 1".into()));
        }
        Ok(())
    }
}

/// `beta = theta / sqrt(n)`.
pub fn theta_to_beta(theta: &DVector<f64>, n: usize) -> DVector<f64> {
    theta / libm::sqrt(n as f64)
}

/// `theta = sqrt(n) beta`.
pub fn beta_to_theta(beta: &DVector<f64>, n: usize) -> DVector<f64> {
    beta * libm::sqrt(n as f64)
}

/// `L_n` on a dataset, optionally with one observation left out. For the
/// quadratic model the sufficient statistics are computed once and
/// downdated per fold.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    model: LossModel,
    data: &'a Dataset,
    sqrt_n: f64,
    /// Quadratic model: `H = W'W/n`, `b = W'y/sqrt(n)`.
    quad: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl<'a> Problem<'a> {
    /// Bind a model to data.
    pub fn new(model: LossModel, data: &'a Dataset) -> Result<Self> {
        data.check_model(model)?;
        let n = data.n() as f64;
        let sqrt_n = libm::sqrt(n);
        let quad = model.is_quadratic().then(|| {
            let h = symmetrize(&(data.w.transpose() * &data.w)) / n;
            let b = data.w.transpose() * &data.y / sqrt_n;
            (h, b)
        });
        Ok(Self { model, data, sqrt_n, quad })
    }

    /// Loss model.
    pub fn model(&self) -> LossModel {
        self.model
    }

    /// Data.
    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    fn index(&self, i: usize, theta: &DVector<f64>) -> f64 {
        self.data.w.row(i).transpose().dot(theta) / self.sqrt_n
    }

    fn rows(&self, exclude: Option<usize>) -> impl Iterator<Item = usize> + '_ {
        (0..self.data.n()).filter(move |&i| Some(i) != exclude)
    }

    /// `l_n(theta, Z_i)`.
    pub fn obs_loss(&self, i: usize, theta: &DVector<f64>) -> f64 {
        self.model.loss(self.index(i, theta), self.data.y[i])
    }

    /// `grad_theta l_n(theta, Z_i)`.
    pub fn obs_grad(&self, i: usize, theta: &DVector<f64>) -> DVector<f64> {
        let d = self.model.dloss(self.index(i, theta), self.data.y[i]);
        self.data.w.row(i).transpose() * (d / self.sqrt_n)
    }

    /// `L_n(theta)` or `L_n^{-i}(theta)`.
    pub fn value(&self, theta: &DVector<f64>, exclude: Option<usize>) -> f64 {
        self.rows(exclude).map(|i| self.obs_loss(i, theta)).sum()
    }

    /// Gradient of `L_n` (or `L_n^{-i}`) in `theta`.
    pub fn gradient(&self, theta: &DVector<f64>, exclude: Option<usize>) -> DVector<f64> {
        if let Some((h, b)) = self.fold_quad(exclude) {
            return h * theta - b;
        }
        let mut g = DVector::zeros(self.data.k());
        for i in self.rows(exclude) {
            let d = self.model.dloss(self.index(i, theta), self.data.y[i]);
            g.axpy(d / self.sqrt_n, &self.data.w.row(i).transpose(), 1.0);
        }
        g
    }

    /// Hessian of `L_n` (or `L_n^{-i}`) in `theta`.
    pub fn hessian(&self, theta: &DVector<f64>, exclude: Option<usize>) -> DMatrix<f64> {
        if let Some((h, _)) = self.fold_quad(exclude) {
            return h;
        }
        let k = self.data.k();
        let n = self.data.n() as f64;
        let mut h = DMatrix::zeros(k, k);
        for i in self.rows(exclude) {
            let c = self.model.d2loss(self.index(i, theta), self.data.y[i]) / n;
            let w = self.data.w.row(i).transpose();
            h.ger(c, &w, &w, 1.0);
        }
        symmetrize(&h)
    }

    fn fold_quad(&self, exclude: Option<usize>) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let (h, b) = self.quad.as_ref()?;
        Some(match exclude {
            None => (h.clone(), b.clone()),
            Some(i) => {
                let w = self.data.w.row(i).transpose();
                let mut h = h.clone();
                h.ger(-1.0 / self.data.n() as f64, &w, &w, 1.0);
                (symmetrize(&h), b - &w * (self.data.y[i] / self.sqrt_n))
            }
        })
    }

    /// `argmin L_n` (or `L_n^{-i}`).
    pub fn fit_erm(&self, exclude: Option<usize>) -> Result<DVector<f64>> {
        let theta = match self.fold_quad(exclude) {
            Some((h, b)) => {
                check_strong_convexity(&h)?;
                h.cholesky().ok_or(Error::RankDeficient { min_eigenvalue: 0.0 })?.solve(&b)
            }
            None => newton(self, None, DVector::zeros(self.data.k()), exclude)?,
        };
        if !self.model.is_quadratic() {
            check_strong_convexity(&self.hessian(&theta, exclude))?;
        }
        Ok(theta)
    }

    /// `argmin L_n + lambda pi` (or with `L_n^{-i}`), optionally warm-started.
    pub fn fit_penalized(
        &self,
        penalty: &PenaltySpec,
        lambda: f64,
        exclude: Option<usize>,
        warm: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>> {
        check_lambda(lambda)?;
        if penalty.dim() != self.data.k() {
            return Err(Error::DimensionMismatch { what: "penalty", expected: self.data.k(), found: penalty.dim() });
        }
        if lambda == 0.0 {
            return self.fit_erm(exclude);
        }
        match penalty.kind() {
            PenaltyKind::Ridge => {
                let p = penalty.a_inverse() * lambda;
                match self.fold_quad(exclude) {
                    Some((h, b)) => Ok((h + &p)
                        .cholesky()
                        .ok_or(Error::RankDeficient { min_eigenvalue: 0.0 })?
                        .solve(&b)),
                    None => {
                        let start = warm.cloned().unwrap_or_else(|| DVector::zeros(self.data.k()));
                        newton(self, Some(&p), start, exclude)
                    }
                }
            }
            PenaltyKind::Lasso => self.fit_lasso(penalty, lambda, exclude, warm),
        }
    }

    fn fit_lasso(
        &self,
        penalty: &PenaltySpec,
        lambda: f64,
        exclude: Option<usize>,
        warm: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>> {
        let a = penalty.a();
        let mut h = match warm {
            Some(t) => {
                check_len(t, self.data.k(), "warm start")?;
                penalty.a_inverse() * t
            }
            None => DVector::zeros(self.data.k()),
        };
        // exact zeros so the first quadratic solve starts from a clean support
        for x in h.iter_mut() {
            if x.abs() <= 1e-12 {
                *x = 0.0;
            }
        }
        if let Some((hs, b)) = self.fold_quad(exclude) {
            let gram = symmetrize(&(a.transpose() * hs * a));
            let c = a.transpose() * b;
            let sol = lasso_quadratic(&gram, &c, lambda, Some(&h), DEFAULT_MAX_SWEEPS)?;
            return Ok(a * sol.h);
        }
        // proximal Newton in h = A^{-1} theta
        let objective = |h: &DVector<f64>| self.value(&(a * h), exclude) + lambda * h.abs().sum();
        let mut f = objective(&h);
        let mut resid = f64::INFINITY;
        for _ in 0..MAX_NEWTON_ITER {
            let theta = a * &h;
            let gh = a.transpose() * self.gradient(&theta, exclude);
            resid = composite_residual(&gh, &h, lambda);
            if resid <= LASSO_FIT_TOL {
                return Ok(theta);
            }
            let gram = symmetrize(&(a.transpose() * self.hessian(&theta, exclude) * a));
            let c = &gram * &h - &gh;
            let target = lasso_quadratic(&gram, &c, lambda, Some(&h), DEFAULT_MAX_SWEEPS)?.h;
            let d = &target - &h;
            let decrease = gh.dot(&d) + lambda * (target.abs().sum() - h.abs().sum());
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-12 {
                let cand = &h + &d * t;
                let fc = objective(&cand);
                if fc <= f + ARMIJO * t * decrease {
                    h = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
                if t == 1.0 {
                    // objective differences can drown in rounding near the optimum
                    let gc = a.transpose() * self.gradient(&(a * &cand), exclude);
                    if composite_residual(&gc, &cand, lambda) < resid {
                        h = cand;
                        f = fc;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(Error::NoConvergence { what: "penalized lasso fit", iterations: MAX_NEWTON_ITER, residual: resid })
    }
}

fn composite_residual(gh: &DVector<f64>, h: &DVector<f64>, lambda: f64) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..h.len() {
        let v = if h[j] != 0.0 {
            (gh[j] + lambda * h[j].signum()).abs()
        } else {
            (gh[j].abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

fn check_strong_convexity(h: &DMatrix<f64>) -> Result<()> {
    let m = min_eigenvalue(h);
    if !(m > MIN_HESSIAN_EIGENVALUE) {
        return Err(Error::RankDeficient { min_eigenvalue: m });
    }
    Ok(())
}

/// Damped Newton on `L_n(theta) + 1/2 theta' P theta`.
fn newton(
    prob: &Problem<'_>,
    quad: Option<&DMatrix<f64>>,
    start: DVector<f64>,
    exclude: Option<usize>,
) -> Result<DVector<f64>> {
    let objective = |t: &DVector<f64>| {
        let mut v = prob.value(t, exclude);
        if let Some(p) = quad {
            v += 0.5 * t.dot(&(p * t));
        }
        v
    };
    let gradient = |t: &DVector<f64>| {
        let mut g = prob.gradient(t, exclude);
        if let Some(p) = quad {
            g += p * t;
        }
        g
    };
    let mut theta = start;
    let mut f = objective(&theta);
    let mut g = gradient(&theta);
    for _ in 0..MAX_NEWTON_ITER {
        let gnorm = g.norm();
        if gnorm <= NEWTON_TOL {
            return Ok(theta);
        }
        let mut hess = prob.hessian(&theta, exclude);
        if let Some(p) = quad {
            hess += p;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&g),
            None => return Err(Error::RankDeficient { min_eigenvalue: min_eigenvalue(&hess) }),
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        loop {
            let cand = &theta + &step * t;
            let fc = objective(&cand);
            let gc = gradient(&cand);
            // near the optimum the objective change is below rounding, so a
            // full step that shrinks the gradient is also accepted
            if fc <= f + ARMIJO * t * slope || (t == 1.0 && gc.norm() < gnorm) {
                theta = cand;
                f = fc;
                g = gc;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::NoConvergence { what: "newton line search", iterations: 0, residual: gnorm });
            }
        }
    }
    Err(Error::NoConvergence { what: "newton", iterations: MAX_NEWTON_ITER, residual: g.norm() })
}

/// `theta_hat_n = argmin_theta L_n(theta)`.
pub fn fit_erm(model: LossModel, data: &Dataset) -> Result<DVector<f64>> {
    Problem::new(model, data)?.fit_erm(None)
}

/// `theta_hat_n^lambda = argmin_theta L_n(theta) + lambda pi(theta)`.
pub fn fit_penalized(
    model: LossModel,
    data: &Dataset,
    penalty: &PenaltySpec,
    lambda: f64,
    warm: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    Problem::new(model, data)?.fit_penalized(penalty, lambda, None, warm)
}

/// Exact leave-one-out fits; row `i` is `theta_hat_n^{lambda,-i}`. Each
/// fold is warm-started at the full-sample fit.
pub fn loo_exact(model: LossModel, data: &Dataset, penalty: &PenaltySpec, lambda: f64) -> Result<DMatrix<f64>> {
    let prob = Problem::new(model, data)?;
    let full = prob.fit_penalized(penalty, lambda, None, None)?;
    loo_exact_from(&prob, penalty, lambda, &full)
}

/// [`loo_exact`] given the full-sample fit.
pub fn loo_exact_from(
    prob: &Problem<'_>,
    penalty: &PenaltySpec,
    lambda: f64,
    theta_hat: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = prob.data.n();
    let mut out = DMatrix::zeros(n, prob.data.k());
    for i in 0..n {
        let t = prob
            .fit_penalized(penalty, lambda, Some(i), Some(theta_hat))
            .map_err(|e| fold_error(i, e))?;
        out.set_row(i, &t.transpose());
    }
    Ok(out)
}

pub(crate) fn fold_error(fold: usize, e: Error) -> Error {
    Error::Fold { fold, lambda_index: None, source: alloc::boxed::Box::new(e) }
}

/// Output of [`loo_approx`].
#[derive(Debug, Clone)]
pub struct ApproxLoo {
    /// Row `i` approximates `theta_hat_n^{lambda,-i}`.
    pub thetas: DMatrix<f64>,
    /// Folds whose downdated Hessian was singular; these rows are exact refits.
    pub flagged: Vec<usize>,
}

/// One Newton step on each leave-one-out objective from `theta_hat`:
/// `theta^{-i} = theta_hat + K_{-i}^{-1} grad l_n(theta_hat, Z_i)` where
/// `K_{-i}` is the penalized Hessian without observation `i`, applied by a
/// rank-one Sherman-Morrison downdate. For Lasso the step is taken in
/// `h = A^{-1} theta` on the active set only.
pub fn loo_approx(
    model: LossModel,
    data: &Dataset,
    penalty: &PenaltySpec,
    lambda: f64,
    theta_hat: &DVector<f64>,
) -> Result<ApproxLoo> {
    let prob = Problem::new(model, data)?;
    loo_approx_from(&prob, penalty, lambda, theta_hat)
}

/// [`loo_approx`] on a prepared [`Problem`].
pub fn loo_approx_from(
    prob: &Problem<'_>,
    penalty: &PenaltySpec,
    lambda: f64,
    theta_hat: &DVector<f64>,
) -> Result<ApproxLoo> {
    check_lambda(lambda)?;
    let data = prob.data;
    let (n, k) = (data.n(), data.k());
    check_len(theta_hat, k, "theta_hat")?;
    if penalty.dim() != k {
        return Err(Error::DimensionMismatch { what: "penalty", expected: k, found: penalty.dim() });
    }
    let hess = prob.hessian(theta_hat, None);
    // columns of `basis` span the directions the step may move in
    let (basis, kmat) = match penalty.kind() {
        PenaltyKind::Ridge => {
            let kmat = if lambda > 0.0 { hess + penalty.a_inverse() * lambda } else { hess };
            (DMatrix::identity(k, k), kmat)
        }
        PenaltyKind::Lasso => {
            let active: Vec<usize> = if lambda == 0.0 {
                (0..k).collect()
            } else {
                let eta = signs(&(penalty.a_inverse() * theta_hat));
                (0..k).filter(|&j| eta[j] != 0).collect()
            };
            let m = select_columns(penalty.a(), &active);
            let kmat = symmetrize(&(m.transpose() * hess * &m));
            (m, kmat)
        }
    };
    let mut thetas = DMatrix::zeros(n, k);
    let mut flagged = Vec::new();
    if basis.ncols() == 0 {
        for i in 0..n {
            thetas.set_row(i, &theta_hat.transpose());
        }
        return Ok(ApproxLoo { thetas, flagged });
    }
    let chol = kmat.cholesky();
    let sqrt_n = prob.sqrt_n;
    for i in 0..n {
        let w = data.w.row(i).transpose();
        let u_i = w.dot(theta_hat) / sqrt_n;
        let d = prob.model.dloss(u_i, data.y[i]);
        let s = prob.model.d2loss(u_i, data.y[i]) / n as f64;
        let u = basis.transpose() * &w;
        let v = &u * (d / sqrt_n);
        let step = chol.as_ref().and_then(|ch| {
            let kv = ch.solve(&v);
            let ku = ch.solve(&u);
            let denom = 1.0 - s * u.dot(&ku);
            let coef = s * u.dot(&kv) / denom;
            (denom > SM_SINGULAR).then(|| kv + ku * coef)
        });
        let row = match step {
            Some(st) => theta_hat + &basis * st,
            None => {
                flagged.push(i);
                prob.fit_penalized(penalty, lambda, Some(i), Some(theta_hat)).map_err(|e| fold_error(i, e))?
            }
        };
        thetas.set_row(i, &row.transpose());
    }
    Ok(ApproxLoo { thetas, flagged })
}

/// Whether `theta0` in [`influence_estimate`] is the truth or a plug-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaSource {
    /// The true local parameter (simulation).
    Known,
    /// An estimate such as `theta_hat_n`.
    PlugIn,
}

/// Influence-function quantities at `theta0`.
#[derive(Debug, Clone)]
pub struct InfluenceBundle {
    /// `theta0 + n^{-1/2} sum_i X_i`.
    pub theta_tilde: DVector<f64>,
    /// Row `i` is `X_n^i = -grad_beta l(theta0 / sqrt(n), Z_i)`.
    pub scores: DMatrix<f64>,
    /// `n^{-1} sum_i X_i X_i'`.
    pub sigma_hat: DMatrix<f64>,
    /// Where `theta0` came from.
    pub source: ThetaSource,
}

/// [`InfluenceBundle`] for `theta0`.
pub fn influence_estimate(
    model: LossModel,
    data: &Dataset,
    theta0: &DVector<f64>,
    source: ThetaSource,
) -> Result<InfluenceBundle> {
    data.check_model(model)?;
    check_len(theta0, data.k(), "theta0")?;
    check_finite_vec(theta0, "theta0")?;
    let (n, k) = (data.n(), data.k());
    let sqrt_n = libm::sqrt(n as f64);
    let mut scores = DMatrix::zeros(n, k);
    for i in 0..n {
        let w = data.w.row(i);
        let u = w.transpose().dot(theta0) / sqrt_n;
        let d = model.dloss(u, data.y[i]);
        scores.set_row(i, &(w * -d));
    }
    let sum = scores.row_sum().transpose();
    let theta_tilde = theta0 + sum / sqrt_n;
    let sigma_hat = symmetrize(&(scores.transpose() * &scores)) / n as f64;
    Ok(InfluenceBundle { theta_tilde, scores, sigma_hat, source })
}

/// Smallest eigenvalue of the Hessian of `L_n` at `theta`; an empirical
/// strong-convexity constant.
pub fn strong_convexity(model: LossModel, data: &Dataset, theta: &DVector<f64>) -> Result<f64> {
    let prob = Problem::new(model, data)?;
    Ok(min_eigenvalue(&prob.hessian(theta, None)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small() -> Dataset {
        let w = DMatrix::from_row_slice(5, 2, &[1.0, 0.2, -0.4, 1.1, 0.3, -0.7, 1.5, 0.1, -0.9, -0.6]);
        let y = DVector::from_vec(vec![0.5, 1.0, -0.3, 1.2, -0.8]);
        Dataset::new(w, y).unwrap()
    }

    #[test]
    fn logistic_helpers_are_stable() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn linear_erm_is_least_squares() {
        let d = small();
        let t = fit_erm(LossModel::LinearSquaredError, &d).unwrap();
        let w = d.w();
        let beta = (w.transpose() * w).try_inverse().unwrap() * w.transpose() * d.y();
        assert!((t - beta_to_theta(&beta, 5)).amax() < 1e-12);
    }

    #[test]
    fn penalized_zero_lambda_is_erm() {
        let d = small();
        let p = PenaltySpec::lasso_identity(2).unwrap();
        let a = fit_erm(LossModel::LinearSquaredError, &d).unwrap();
        let b = fit_penalized(LossModel::LinearSquaredError, &d, &p, 0.0, None).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn rejects_small_n_and_bad_logistic_outcomes() {
        assert!(Dataset::new(DMatrix::zeros(2, 2), DVector::zeros(2)).is_err());
        let d = small();
        assert!(fit_erm(LossModel::LogisticNll, &d).is_err());
    }

    #[test]
    fn rank_deficient_design() {
        let w = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0, 0.5, 1.0]);
        let d = Dataset::new(w, DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0])).unwrap();
        assert!(matches!(fit_erm(LossModel::LinearSquaredError, &d), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn noiseless_influence_is_trivial() {
        let d0 = small();
        let theta0 = DVector::from_vec(vec![0.7, -1.1]);
        let y = d0.w() * theta_to_beta(&theta0, 5);
        let d = Dataset::new(d0.w().clone(), y).unwrap();
        let b = influence_estimate(LossModel::LinearSquaredError, &d, &theta0, ThetaSource::Known).unwrap();
        assert!(b.scores.amax() < 1e-15);
        assert!((b.theta_tilde - &theta0).amax() < 1e-15);
        assert!(b.sigma_hat.amax() < 1e-28);
        let t = fit_erm(LossModel::LinearSquaredError, &d).unwrap();
        assert!((t - theta0).amax() < 1e-12);
    }

    #[test]
    fn approx_equals_exact_for_linear_ridge() {
        let d = small();
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let p = PenaltySpec::ridge(a).unwrap();
        let m = LossModel::LinearSquaredError;
        let full = fit_penalized(m, &d, &p, 0.7, None).unwrap();
        let ex = loo_exact(m, &d, &p, 0.7).unwrap();
        let ap = loo_approx(m, &d, &p, 0.7, &full).unwrap();
        assert!(ap.flagged.is_empty());
        assert!((ex - ap.thetas).amax() < 1e-12);
    }
}
