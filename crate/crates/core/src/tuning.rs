//! SURE minimisation over `lambda` with the smallest-argmin tie-break.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{check_covariance, check_finite_vec, check_len};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::search::{golden_section, log_grid};
use crate::segments::{lasso_breakpoints, SegmentList};
use crate::sure::{grid_local_minima, segment_sure, RidgeSure};
use crate::{Error, Result, TIE_TOLERANCE};

/// Lower end of the Ridge seeding grid.
pub const RIDGE_GRID_LO: f64 = 1e-4;
/// Upper end of the Ridge seeding grid; minimisers here are reported as saturated.
pub const RIDGE_GRID_HI: f64 = 1e6;
/// Points in the Ridge seeding grid.
pub const RIDGE_GRID_POINTS: usize = 200;
/// Golden-section tolerance in `lambda`.
pub const RIDGE_REFINE_TOL: f64 = 1e-8;

/// The admissible set of tuning parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSet {
    /// `[0, inf)`.
    AllNonneg,
    /// A finite set. Order does not matter; duplicates are rejected.
    FiniteGrid(Vec<f64>),
}

/// Result of [`minimize_sure`].
#[derive(Debug, Clone, PartialEq)]
pub struct SureMinimum {
    /// Smallest minimiser (ties within [`TIE_TOLERANCE`]).
    pub lambda_star: f64,
    /// SURE at `lambda_star`.
    pub sure_star: f64,
    /// Every candidate tied with the minimum, increasing.
    pub ties: Vec<f64>,
    /// Ridge over `[0, inf)`: the minimiser sits at the top of the search range.
    pub saturated: bool,
    /// Lasso: `lambda_star` lies in the flat segment where `h = 0`.
    pub flat_tail: bool,
    /// Lasso over `[0, inf)`: `lambda_star` is breakpoint number
    /// `breakpoint_index` (1-based; 0 means `lambda = 0`).
    pub breakpoint_index: Option<usize>,
    /// `(lambda, SURE)` pairs that were compared.
    pub candidates: Vec<(f64, f64)>,
}

/// Minimise `SURE(., theta, sigma)` over `set`.
pub fn minimize_sure(
    penalty: &PenaltySpec,
    theta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    set: &LambdaSet,
) -> Result<SureMinimum> {
    check_covariance(sigma, penalty.dim())?;
    check_len(theta, penalty.dim(), "theta")?;
    check_finite_vec(theta, "theta")?;
    match (penalty.kind(), set) {
        (_, LambdaSet::FiniteGrid(grid)) => {
            let grid = sorted_grid(grid)?;
            let eval = SureEvaluator::new(penalty, theta, sigma)?;
            let cands: Vec<(f64, f64)> = grid.iter().map(|&l| (l, eval.eval(l))).collect();
            let mut m = pick(cands);
            if let SureEvaluator::Lasso { segs, .. } = &eval {
                m.flat_tail = in_flat_tail(segs, m.lambda_star);
            }
            Ok(m)
        }
        (PenaltyKind::Ridge, LambdaSet::AllNonneg) => {
            let f = RidgeSure::new(penalty, theta, sigma)?;
            Ok(ridge_all_nonneg(&f))
        }
        (PenaltyKind::Lasso, LambdaSet::AllNonneg) => {
            let segs = lasso_breakpoints(penalty, theta)?;
            Ok(lasso_all_nonneg(penalty, theta, sigma, &segs))
        }
    }
}

/// Sort a finite grid and reject empty, negative, non-finite or duplicate entries.
pub fn sorted_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    let mut g = grid.to_vec();
    if g.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidArgument("lambda grid entries must be finite and >= 0".into()));
    }
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if let Some(w) = g.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(alloc::format!("duplicate lambda {} in grid", w[0])));
    }
    Ok(g)
}

/// SURE evaluation specialised per penalty: the eigenbasis form for Ridge,
/// the path for Lasso (right limits at breakpoints).
#[derive(Debug, Clone)]
pub enum SureEvaluator<'a> {
    /// Ridge.
    Ridge(RidgeSure),
    /// Lasso.
    Lasso {
        /// Penalty.
        penalty: &'a PenaltySpec,
        /// `theta`.
        theta: DVector<f64>,
        /// `Sigma`.
        sigma: DMatrix<f64>,
        /// Path of `theta`.
        segs: SegmentList,
    },
}

impl<'a> SureEvaluator<'a> {
    /// Precompute.
    pub fn new(penalty: &'a PenaltySpec, theta: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<Self> {
        match penalty.kind() {
            PenaltyKind::Ridge => Ok(Self::Ridge(RidgeSure::new(penalty, theta, sigma)?)),
            PenaltyKind::Lasso => {
                check_covariance(sigma, penalty.dim())?;
                Ok(Self::Lasso {
                    penalty,
                    theta: theta.clone(),
                    sigma: sigma.clone(),
                    segs: lasso_breakpoints(penalty, theta)?,
                })
            }
        }
    }

    /// SURE at `lambda`.
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            Self::Ridge(f) => f.eval(lambda),
            Self::Lasso { penalty, theta, sigma, segs } => {
                if lambda == 0.0 {
                    return sigma.trace();
                }
                let seg = &segs.segments[segs.segment_index(lambda)];
                segment_sure(penalty, lambda, theta, sigma, &seg.eta)
            }
        }
    }
}

fn in_flat_tail(segs: &SegmentList, lambda: f64) -> bool {
    match segs.breakpoints.last() {
        Some(&top) => lambda >= top,
        None => true,
    }
}

/// Smallest `lambda` among candidates within [`TIE_TOLERANCE`] of the best value.
fn pick(mut cands: Vec<(f64, f64)>) -> SureMinimum {
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let best = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let ties: Vec<f64> = cands.iter().filter(|c| c.1 <= best + TIE_TOLERANCE).map(|c| c.0).collect();
    let lambda_star = ties[0];
    let sure_star = cands.iter().find(|c| c.0 == lambda_star).unwrap().1;
    SureMinimum {
        lambda_star,
        sure_star,
        ties,
        saturated: false,
        flat_tail: false,
        breakpoint_index: None,
        candidates: cands,
    }
}

fn ridge_all_nonneg(f: &RidgeSure) -> SureMinimum {
    let mut grid = Vec::with_capacity(RIDGE_GRID_POINTS + 1);
    grid.push(0.0);
    grid.extend(log_grid(RIDGE_GRID_LO, RIDGE_GRID_HI, RIDGE_GRID_POINTS));
    let vals: Vec<f64> = grid.iter().map(|&l| f.eval(l)).collect();
    let mut cands: Vec<(f64, f64)> = Vec::new();
    for i in grid_local_minima(&vals) {
        if i + 1 == grid.len() {
            cands.push((grid[i], vals[i]));
            continue;
        }
        let lo = if i == 0 { 0.0 } else { grid[i - 1] };
        let hi = grid[i + 1];
        let (x, fx) = golden_section(|l| f.eval(l), lo, hi, RIDGE_REFINE_TOL, 1000);
        if fx <= vals[i] {
            cands.push((x, fx));
        } else {
            cands.push((grid[i], vals[i]));
        }
    }
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    cands.dedup_by(|a, b| a.0 == b.0);
    let mut m = pick(cands);
    m.saturated = m.lambda_star >= RIDGE_GRID_HI;
    m
}

fn lasso_all_nonneg(
    penalty: &PenaltySpec,
    theta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    segs: &SegmentList,
) -> SureMinimum {
    // SURE increases on every open segment, so the infimum over a segment is
    // its right limit at the left breakpoint
    let mut cands = Vec::with_capacity(segs.breakpoints.len() + 1);
    cands.push((0.0, sigma.trace()));
    for (i, &b) in segs.breakpoints.iter().enumerate() {
        let eta = &segs.segments[i + 1].eta;
        cands.push((b, segment_sure(penalty, b, theta, sigma, eta)));
    }
    let mut m = pick(cands);
    m.breakpoint_index = segs.breakpoints.iter().position(|&b| b == m.lambda_star).map(|i| i + 1).or(Some(0));
    m.flat_tail = segs.breakpoints.is_empty() || (m.lambda_star > 0.0 && in_flat_tail(segs, m.lambda_star));
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ridge_origin_saturates() {
        let p = PenaltySpec::ridge_identity(1).unwrap();
        let m = minimize_sure(&p, &DVector::zeros(1), &DMatrix::identity(1, 1), &LambdaSet::AllNonneg).unwrap();
        assert_eq!(m.lambda_star, RIDGE_GRID_HI);
        assert!(m.saturated);
    }

    #[test]
    fn ridge_scalar_interior() {
        // SURE = t^2 w^2 + 1 - 2w with w = l/(1+l); minimum at w = 1/t^2
        let p = PenaltySpec::ridge_identity(1).unwrap();
        let t = 2.0;
        let m = minimize_sure(&p, &DVector::from_element(1, t), &DMatrix::identity(1, 1), &LambdaSet::AllNonneg)
            .unwrap();
        let w = 1.0 / (t * t);
        let want = w / (1.0 - w);
        assert!((m.lambda_star - want).abs() < 1e-7, "{}", m.lambda_star);
        assert!(!m.saturated);
    }

    #[test]
    fn lasso_tie_breaks_to_smaller() {
        let p = PenaltySpec::lasso_identity(3).unwrap();
        let t = DVector::from_vec(vec![libm::sqrt(1.0 / 8.0), libm::sqrt(9.0 / 8.0), 2.0]);
        let m = minimize_sure(&p, &t, &DMatrix::identity(3, 3), &LambdaSet::AllNonneg).unwrap();
        assert!((m.lambda_star - 1.0 / libm::sqrt(8.0)).abs() < 1e-12);
        assert!((m.sure_star - 1.375).abs() < 1e-9);
        assert_eq!(m.ties.len(), 2);
        assert_eq!(m.breakpoint_index, Some(1));
        assert!(!m.flat_tail);
    }

    #[test]
    fn finite_grid() {
        let p = PenaltySpec::ridge_identity(1).unwrap();
        let set = LambdaSet::FiniteGrid(vec![5.0, 0.0, 1.0]);
        let m = minimize_sure(&p, &DVector::from_element(1, 0.0), &DMatrix::identity(1, 1), &set).unwrap();
        assert_eq!(m.lambda_star, 5.0);
        let single = LambdaSet::FiniteGrid(vec![0.3]);
        let m = minimize_sure(&p, &DVector::from_element(1, 1.0), &DMatrix::identity(1, 1), &single).unwrap();
        assert_eq!(m.lambda_star, 0.3);
        assert!(minimize_sure(&p, &DVector::zeros(1), &DMatrix::identity(1, 1), &LambdaSet::FiniteGrid(vec![]))
            .is_err());
        assert!(sorted_grid(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn lasso_flat_tail_flagged() {
        // small theta with large noise: shrink everything
        let p = PenaltySpec::lasso_identity(2).unwrap();
        let t = DVector::from_vec(vec![0.1, -0.2]);
        let m = minimize_sure(&p, &t, &DMatrix::identity(2, 2), &LambdaSet::AllNonneg).unwrap();
        assert!(m.flat_tail);
        assert!((m.lambda_star - 0.2).abs() < 1e-12);
    }
}
