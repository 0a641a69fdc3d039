//! Leave-one-out cross-validation `CV_n(lambda) = sum_i l_n(theta^{lambda,-i}, Z_i)`,
//! CV tuning, and the CV-versus-SURE gap.
//!
//! Rows are put into a canonical order before any arithmetic so that the
//! curve does not depend on how the observations were listed.

use alloc::boxed::Box;
use alloc::vec::Vec;

use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::erm::{influence_estimate, loo_approx_from, loo_exact_from, Dataset, LossModel, Problem, ThetaSource};
use crate::penalty::PenaltySpec;
use crate::sure::{check_grid, sure};
use crate::{Error, Result, TIE_TOLERANCE};

/// How the leave-one-out fits are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvMode {
    /// `n` refits.
    ExactLoo,
    /// One Newton step per fold (see [`crate::erm::loo_approx`]).
    ApproxLoo,
}

/// `CV_n` over a grid.
#[derive(Debug, Clone)]
pub struct CvCurve {
    /// Increasing grid.
    pub lambdas: Vec<f64>,
    /// `CV_n(lambda)` (a sum over observations, not an average).
    pub values: Vec<f64>,
    /// Full-sample penalized fits `theta_hat_n^lambda`.
    pub fits: Vec<DVector<f64>>,
    /// Mode used.
    pub mode: CvMode,
    /// Sample size.
    pub n: usize,
    /// Dimension.
    pub k: usize,
    /// Approximate mode: `(lambda index, fold)` pairs that fell back to exact refits.
    pub flagged: Vec<(usize, usize)>,
}

/// Lexicographic row order on `(W_i, Y_i)`.
pub fn canonical_order(data: &Dataset) -> Vec<usize> {
    let (w, y) = (data.w(), data.y());
    let mut idx: Vec<usize> = (0..data.n()).collect();
    idx.sort_by(|&a, &b| {
        for j in 0..data.k() {
            match w[(a, j)].total_cmp(&w[(b, j)]) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        y[a].total_cmp(&y[b])
    });
    idx
}

/// Evaluate `CV_n` on a strictly increasing grid. Fits are warm-started from
/// the largest `lambda` down.
pub fn cv_curve(
    model: LossModel,
    data: &Dataset,
    penalty: &PenaltySpec,
    lambdas: &[f64],
    mode: CvMode,
) -> Result<CvCurve> {
    check_grid(lambdas)?;
    let data = data.permuted(&canonical_order(data))?;
    let prob = Problem::new(model, &data)?;
    let m = lambdas.len();
    let mut values = alloc::vec![0.0; m];
    let mut fits = alloc::vec![DVector::zeros(data.k()); m];
    let mut flagged = Vec::new();
    let mut warm: Option<DVector<f64>> = None;
    for j in (0..m).rev() {
        let lambda = lambdas[j];
        let with_index = |e: Error| match e {
            Error::Fold { fold, source, .. } => Error::Fold { fold, lambda_index: Some(j), source },
            other => other,
        };
        let full = prob.fit_penalized(penalty, lambda, None, warm.as_ref()).map_err(with_index)?;
        let loo = match mode {
            CvMode::ExactLoo => loo_exact_from(&prob, penalty, lambda, &full).map_err(with_index)?,
            CvMode::ApproxLoo => {
                let a = loo_approx_from(&prob, penalty, lambda, &full).map_err(with_index)?;
                flagged.extend(a.flagged.iter().map(|&i| (j, i)));
                a.thetas
            }
        };
        values[j] = held_out_sum(&prob, &loo);
        fits[j] = full.clone();
        warm = Some(full);
    }
    flagged.sort_unstable();
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Fold {
            fold: 0,
            lambda_index: Some(bad),
            source: Box::new(Error::NonFinite("cross-validation value")),
        });
    }
    Ok(CvCurve { lambdas: lambdas.to_vec(), values, fits, mode, n: data.n(), k: data.k(), flagged })
}

fn held_out_sum(prob: &Problem<'_>, loo: &DMatrix<f64>) -> f64 {
    (0..loo.nrows()).map(|i| prob.obs_loss(i, &loo.row(i).transpose())).sum()
}

/// Index of the smallest value, ties (within [`TIE_TOLERANCE`]) resolved to
/// the smallest index.
pub fn argmin_with_ties(values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    values.iter().position(|&v| v <= best + TIE_TOLERANCE).unwrap_or(0)
}

/// CV-tuned estimator.
#[derive(Debug, Clone)]
pub struct CvTuned {
    /// `lambda_n^*`.
    pub lambda_star: f64,
    /// Grid index of `lambda_n^*`.
    pub index: usize,
    /// `theta_hat_n^{lambda_n^*}`.
    pub theta_star: DVector<f64>,
    /// The curve that was minimised.
    pub curve: CvCurve,
}

/// `lambda_n^* = argmin CV_n` over the grid and the corresponding fit.
pub fn tune_cv(
    model: LossModel,
    data: &Dataset,
    penalty: &PenaltySpec,
    lambdas: &[f64],
    mode: CvMode,
) -> Result<CvTuned> {
    let curve = cv_curve(model, data, penalty, lambdas, mode)?;
    let index = argmin_with_ties(&curve.values);
    Ok(CvTuned { lambda_star: curve.lambdas[index], index, theta_star: curve.fits[index].clone(), curve })
}

/// CV-versus-SURE comparison on one dataset. `2 CV_n` is compared with SURE
/// because the loss is normalised to `1/2 (y - w'beta)^2`, which makes
/// `CV_n = const + SURE / 2` to first order.
#[derive(Debug, Clone)]
pub struct GapReport {
    /// `max_lambda |2 CV_n - SURE(lambda, theta_hat_n, Sigma_hat_n)|`.
    pub raw_gap: f64,
    /// The same after subtracting both curves' values at `lambda_ref`.
    pub centered_gap: f64,
    /// Smallest grid point.
    pub lambda_ref: f64,
    /// Grid minimiser of `CV_n`.
    pub argmin_cv: f64,
    /// Grid minimiser of `SURE(., theta_hat_n, Sigma_hat_n)`.
    pub argmin_sure: f64,
    /// `2 CV_n` per grid point.
    pub cv2: Vec<f64>,
    /// SURE with `Sigma_hat_n`.
    pub sure: Vec<f64>,
    /// Present when a true `Sigma` was supplied.
    pub true_sigma: Option<TrueSigmaGap>,
    /// `theta_hat_n`.
    pub theta_hat: DVector<f64>,
    /// `Sigma_hat_n` at `theta0`.
    pub sigma_hat: DMatrix<f64>,
}

/// Gap measured against SURE with the true covariance.
#[derive(Debug, Clone)]
pub struct TrueSigmaGap {
    /// Raw gap.
    pub raw_gap: f64,
    /// Centered gap.
    pub centered_gap: f64,
    /// Grid minimiser of `SURE(., theta_hat_n, Sigma)`.
    pub argmin_sure: f64,
}

/// Compare `CV_n` with SURE at `(theta_hat_n, Sigma_hat_n)` (and at
/// `(theta_hat_n, Sigma)` when `sigma_true` is given).
pub fn cv_sure_gap(
    model: LossModel,
    data: &Dataset,
    penalty: &PenaltySpec,
    lambdas: &[f64],
    mode: CvMode,
    theta0: &DVector<f64>,
    sigma_true: Option<&DMatrix<f64>>,
) -> Result<GapReport> {
    let curve = cv_curve(model, data, penalty, lambdas, mode)?;
    let theta_hat = Problem::new(model, data)?.fit_erm(None)?;
    let sigma_hat = influence_estimate(model, data, theta0, ThetaSource::Known)?.sigma_hat;
    let cv2: Vec<f64> = curve.values.iter().map(|v| 2.0 * v).collect();
    let sure_vals = lambdas
        .iter()
        .map(|&l| sure(penalty, l, &theta_hat, &sigma_hat))
        .collect::<Result<Vec<_>>>()?;
    let (raw_gap, centered_gap) = gaps(&cv2, &sure_vals);
    let true_sigma = match sigma_true {
        Some(s) => {
            let vals = lambdas.iter().map(|&l| sure(penalty, l, &theta_hat, s)).collect::<Result<Vec<_>>>()?;
            let (raw, centered) = gaps(&cv2, &vals);
            Some(TrueSigmaGap { raw_gap: raw, centered_gap: centered, argmin_sure: lambdas[argmin_with_ties(&vals)] })
        }
        None => None,
    };
    Ok(GapReport {
        raw_gap,
        centered_gap,
        lambda_ref: lambdas[0],
        argmin_cv: lambdas[argmin_with_ties(&cv2)],
        argmin_sure: lambdas[argmin_with_ties(&sure_vals)],
        cv2,
        sure: sure_vals,
        true_sigma,
        theta_hat,
        sigma_hat,
    })
}

fn gaps(cv2: &[f64], sure: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = cv2.iter().zip(sure).map(|(c, s)| c - s).collect();
    let raw = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let centered = d.iter().fold(0.0f64, |m, x| m.max((x - d[0]).abs()));
    (raw, centered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn three_points() -> Dataset {
        Dataset::new(DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0]), DVector::from_vec(vec![1.0, 1.0, 2.0]))
            .unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        let d = three_points();
        let p = PenaltySpec::ridge_identity(1).unwrap();
        for g in [vec![], vec![0.1, 0.1], vec![1.0, 0.5]] {
            assert!(cv_curve(LossModel::LinearSquaredError, &d, &p, &g, CvMode::ExactLoo).is_err());
        }
    }

    #[test]
    fn single_point_grid() {
        let d = three_points();
        let p = PenaltySpec::ridge_identity(1).unwrap();
        let t = tune_cv(LossModel::LinearSquaredError, &d, &p, &[0.4], CvMode::ExactLoo).unwrap();
        assert_eq!(t.lambda_star, 0.4);
        let g = cv_sure_gap(LossModel::LinearSquaredError, &d, &p, &[0.4], CvMode::ExactLoo, &DVector::zeros(1), None)
            .unwrap();
        assert_eq!(g.centered_gap, 0.0);
    }

    #[test]
    fn ties_go_to_smallest_index() {
        assert_eq!(argmin_with_ties(&[2.0, 1.0, 1.0 + 1e-12, 3.0]), 1);
        assert_eq!(argmin_with_ties(&[1.0 + 5e-11, 1.0]), 0);
    }
}
