//! Shape diagnostics for SURE as a function of `(lambda, R)` where
//! `theta = R nu`: Ridge supermodularity, the Lasso sawtooth tuning map, and
//! the well-separation gap of the minimiser.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{check_covariance, check_finite_vec, check_len};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::search::{golden_section, log_grid};
use crate::segments::lasso_breakpoints;
use crate::sure::{grid_local_minima, segment_sure, DirectionCoords, RidgeSure};
use crate::tuning::{minimize_sure, LambdaSet, RIDGE_GRID_HI, RIDGE_GRID_LO, RIDGE_GRID_POINTS, RIDGE_REFINE_TOL};
use crate::{Error, Result};

/// Relative tolerance for matching `lambda*(R)` to a scaled breakpoint.
pub const SAWTOOTH_MATCH_TOL: f64 = 1e-9;

/// Smallest double difference
/// `[S(l2,R2) - S(l1,R2)] - [S(l2,R1) - S(l1,R1)]` over adjacent cells of
/// the `(lambda, R)` grid, with `S(l, R) = SURE(l, R nu, Sigma)`.
pub fn supermodularity_gap(
    penalty: &PenaltySpec,
    nu: &DVector<f64>,
    r_grid: &[f64],
    lambda_grid: &[f64],
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    if penalty.kind() != PenaltyKind::Ridge {
        return Err(Error::WrongPenalty("supermodularity is a Ridge diagnostic"));
    }
    let nu = check_direction(penalty, nu)?;
    check_covariance(sigma, penalty.dim())?;
    if r_grid.len() < 2 || lambda_grid.len() < 2 {
        return Err(Error::InvalidArgument("R and lambda grids need at least two points".into()));
    }
    if r_grid.iter().any(|r| !r.is_finite() || *r < 0.0) || r_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("R grid must be non-negative and non-decreasing".into()));
    }
    crate::sure::check_grid(lambda_grid)?;
    let table: Vec<Vec<f64>> = r_grid
        .iter()
        .map(|&r| {
            let f = RidgeSure::new(penalty, &(&nu * r), sigma)?;
            Ok(lambda_grid.iter().map(|&l| f.eval(l)).collect())
        })
        .collect::<Result<_>>()?;
    let mut worst = f64::INFINITY;
    for i in 0..r_grid.len() - 1 {
        for j in 0..lambda_grid.len() - 1 {
            let d = (table[i + 1][j + 1] - table[i + 1][j]) - (table[i][j + 1] - table[i][j]);
            worst = worst.min(d);
        }
    }
    Ok(worst)
}

/// One row of [`sawtooth_profile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SawtoothPoint {
    /// Radius.
    pub r: f64,
    /// SURE-minimising `lambda` for `theta = R nu`.
    pub lambda_star: f64,
    /// `j(R)`: `lambda_star = R lambda_j` with `lambda_j` the breakpoints of
    /// the unit direction (`lambda_0 = 0`).
    pub segment_index: usize,
}

impl SawtoothPoint {
    /// `lambda_star / R`.
    pub fn lambda_over_r(&self) -> f64 {
        if self.r == 0.0 {
            0.0
        } else {
            self.lambda_star / self.r
        }
    }
}

/// Lasso tuning map `R -> lambda*(R nu)` over an increasing positive grid.
/// Fails with [`Error::Structure`] if a minimiser is not a scaled
/// breakpoint of `nu` or if `j(R)` increases.
pub fn sawtooth_profile(
    penalty: &PenaltySpec,
    nu: &DVector<f64>,
    r_grid: &[f64],
    sigma: &DMatrix<f64>,
) -> Result<Vec<SawtoothPoint>> {
    if penalty.kind() != PenaltyKind::Lasso {
        return Err(Error::WrongPenalty("the sawtooth profile is a Lasso diagnostic"));
    }
    let nu = check_direction(penalty, nu)?;
    check_covariance(sigma, penalty.dim())?;
    if r_grid.is_empty() {
        return Err(Error::InvalidArgument("R grid is empty".into()));
    }
    if r_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("R grid must be positive and increasing".into()));
    }
    let unit = lasso_breakpoints(penalty, &nu)?;
    let mut knots = Vec::with_capacity(unit.breakpoints.len() + 1);
    knots.push(0.0);
    knots.extend_from_slice(&unit.breakpoints);

    let mut out: Vec<SawtoothPoint> = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let m = minimize_sure(penalty, &(&nu * r), sigma, &LambdaSet::AllNonneg)?;
        let j = knots
            .iter()
            .position(|&l| (m.lambda_star - r * l).abs() <= SAWTOOTH_MATCH_TOL * (r * l).max(1.0))
            .ok_or_else(|| {
                Error::Structure(format!("lambda* = {} at R = {r} is not a scaled breakpoint", m.lambda_star))
            })?;
        if let Some(prev) = out.last() {
            if j > prev.segment_index {
                return Err(Error::Structure(format!(
                    "segment index rose from {} to {j} between R = {} and R = {r}",
                    prev.segment_index, prev.r
                )));
            }
        }
        out.push(SawtoothPoint { r, lambda_star: m.lambda_star, segment_index: j });
    }
    Ok(out)
}

/// `inf { SURE(l) : l >= 0, |l - lambda_star| > epsilon } - SURE(lambda_star)`,
/// including the `lambda -> inf` limit. Lasso values are right limits.
pub fn well_separation(
    penalty: &PenaltySpec,
    theta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    lambda_star: f64,
    epsilon: f64,
) -> Result<f64> {
    check_covariance(sigma, penalty.dim())?;
    check_len(theta, penalty.dim(), "theta")?;
    check_finite_vec(theta, "theta")?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    if !(lambda_star >= 0.0 && lambda_star.is_finite()) {
        return Err(Error::InvalidArgument("lambda_star must be finite and >= 0".into()));
    }
    let (lo_x, hi_x) = (lambda_star - epsilon, lambda_star + epsilon);
    let outside = |l: f64| l < lo_x || l > hi_x;
    match penalty.kind() {
        PenaltyKind::Ridge => {
            let f = RidgeSure::new(penalty, theta, sigma)?;
            let mut pts: Vec<f64> = Vec::with_capacity(RIDGE_GRID_POINTS + 3);
            pts.push(0.0);
            pts.extend(log_grid(RIDGE_GRID_LO, RIDGE_GRID_HI, RIDGE_GRID_POINTS));
            pts.push(lo_x);
            pts.push(hi_x);
            pts.retain(|&l| l >= 0.0 && (outside(l) || l == lo_x || l == hi_x));
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts.dedup();
            let vals: Vec<f64> = pts.iter().map(|&l| f.eval(l)).collect();
            let mut best = vals.iter().copied().fold(f.eval(f64::INFINITY), f64::min);
            for i in grid_local_minima(&vals) {
                if i == 0 || i + 1 == pts.len() {
                    continue;
                }
                let (mut a, mut b) = (pts[i - 1], pts[i + 1]);
                if a < hi_x && b > lo_x {
                    // bracket straddles the excluded window; keep the side holding pts[i]
                    if pts[i] <= lo_x {
                        b = b.min(lo_x);
                    } else {
                        a = a.max(hi_x);
                    }
                }
                let (_, fx) = golden_section(|l| f.eval(l), a, b, RIDGE_REFINE_TOL, 1000);
                best = best.min(fx);
            }
            Ok(best - f.eval(lambda_star))
        }
        PenaltyKind::Lasso => {
            let segs = lasso_breakpoints(penalty, theta)?;
            let at = |l: f64| {
                if l == 0.0 {
                    sigma.trace()
                } else {
                    segment_sure(penalty, l, theta, sigma, &segs.segments[segs.segment_index(l)].eta)
                }
            };
            let mut best = f64::INFINITY;
            if outside(0.0) {
                best = best.min(sigma.trace());
            }
            for s in &segs.segments {
                // SURE increases inside a segment, so each piece's infimum is its left end
                if s.lo < lo_x {
                    best = best.min(segment_sure(penalty, s.lo, theta, sigma, &s.eta));
                }
                let start = s.lo.max(hi_x);
                if start < s.hi {
                    best = best.min(segment_sure(penalty, start, theta, sigma, &s.eta));
                }
            }
            Ok(best - at(lambda_star))
        }
    }
}

fn check_direction(penalty: &PenaltySpec, nu: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(nu, penalty.dim(), "nu")?;
    check_finite_vec(nu, "nu")?;
    DirectionCoords::unit(nu)
}
