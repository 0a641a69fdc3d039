//! The Lasso path `lambda -> h^lambda(theta)`: breakpoints, sign pattern on
//! each segment, and the per-segment SURE curvature
//! `eta_J' (A_J'A_J)^{-1} eta_J`.
//!
//! The path is traced by homotopy from `lambda_max = ||A'theta||_inf`, where
//! `h = 0`, down to `lambda = 0`. On a segment with active set `J` and signs
//! `eta_J`, `h_J(lambda) = a - lambda b` with `a = G_J^{-1} c_J`,
//! `b = G_J^{-1} eta_J`, `G = A'A`, `c = A'theta`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{check_finite_vec, check_len};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::prox::{prox, signs};
use crate::{Error, Result};

/// Events closer than this (relative to `max(1, lambda)`) are processed together.
pub const EVENT_MERGE_TOL: f64 = 1e-10;

/// One open segment `(lo, hi)` of the path. The last segment has `hi = inf`
/// and `eta = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Left end.
    pub lo: f64,
    /// Right end (`f64::INFINITY` for the flat tail).
    pub hi: f64,
    /// Sign pattern of `h` inside the segment.
    pub eta: Vec<i8>,
    /// `eta_J' (A_J'A_J)^{-1} eta_J`.
    pub curvature: f64,
    /// `h(lambda) = intercept - lambda * slope` inside the segment.
    pub intercept: DVector<f64>,
    /// See `intercept`.
    pub slope: DVector<f64>,
}

/// Breakpoints and segments of the Lasso path.
///
/// `breakpoints` are `lambda_1 < ... < lambda_m` with `lambda_m = ||A'theta||_inf`.
/// Segment `i` is `(lambda_i, lambda_{i+1})` with `lambda_0 = 0` and
/// `lambda_{m+1} = inf`, so there are `m + 1` segments. For `theta = 0`
/// there are no breakpoints and a single flat segment.
#[derive(Debug, Clone)]
pub struct SegmentList {
    /// Increasing kink locations.
    pub breakpoints: Vec<f64>,
    /// Segments in increasing `lambda` order.
    pub segments: Vec<Segment>,
    /// Degenerate (simultaneous) events that were merged.
    pub warnings: Vec<String>,
}

impl SegmentList {
    /// Sign pattern per segment.
    pub fn eta_per_segment(&self) -> Vec<Vec<i8>> {
        self.segments.iter().map(|s| s.eta.clone()).collect()
    }

    /// Curvature per segment.
    pub fn curvature_per_segment(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.curvature).collect()
    }

    /// Number of segments (`breakpoints.len() + 1`).
    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Index of the segment containing `lambda`, with breakpoints assigned
    /// to the segment on their right (within a relative `1e-12`).
    pub fn segment_index(&self, lambda: f64) -> usize {
        let probe = lambda * (1.0 + crate::sure::RIGHT_LIMIT_OFFSET);
        self.breakpoints.partition_point(|&b| b <= probe)
    }

    /// `h^lambda(theta)` read off the path.
    pub fn h_at(&self, lambda: f64) -> DVector<f64> {
        let s = &self.segments[self.segment_index(lambda)];
        &s.intercept - &s.slope * lambda
    }
}

/// Trace the Lasso path for `theta`.
pub fn lasso_breakpoints(penalty: &PenaltySpec, theta: &DVector<f64>) -> Result<SegmentList> {
    if penalty.kind() != PenaltyKind::Lasso {
        return Err(Error::WrongPenalty("breakpoints are defined for Lasso only"));
    }
    check_len(theta, penalty.dim(), "theta")?;
    check_finite_vec(theta, "theta")?;
    let k = penalty.dim();
    let gram = penalty.gram();
    let c = penalty.a().transpose() * theta;
    let lambda_max = c.amax();
    let max_segments = 3usize.saturating_pow(k as u32);

    let tail = Segment {
        lo: lambda_max,
        hi: f64::INFINITY,
        eta: vec![0; k],
        curvature: 0.0,
        intercept: DVector::zeros(k),
        slope: DVector::zeros(k),
    };
    if lambda_max == 0.0 {
        return Ok(SegmentList { breakpoints: Vec::new(), segments: vec![tail], warnings: Vec::new() });
    }

    let mut warnings = Vec::new();
    // collected from the top down
    let mut segs_desc: Vec<Segment> = Vec::new();
    let mut breaks_desc: Vec<f64> = vec![lambda_max];

    let mut eta = vec![0i8; k];
    for j in 0..k {
        if (c[j].abs() - lambda_max).abs() <= EVENT_MERGE_TOL * lambda_max.max(1.0) {
            eta[j] = if c[j] > 0.0 { 1 } else { -1 };
        }
    }
    if eta.iter().filter(|&&e| e != 0).count() > 1 {
        warnings.push(format!("{} coordinates enter together at lambda = {lambda_max}", eta.iter().filter(|&&e| e != 0).count()));
    }
    let mut lambda_cur = lambda_max;
    // coordinates changed at lambda_cur; rounding can make them look like
    // they fire again immediately below it
    let mut just_changed: Vec<usize> = (0..k).filter(|&j| eta[j] != 0).collect();

    loop {
        let (a, b) = affine_pieces(gram, &c, &eta)?;
        let active: Vec<usize> = (0..k).filter(|&j| eta[j] != 0).collect();
        let p = &c - gram * &a;
        let q = gram * &b;
        // candidate events strictly below lambda_cur
        let below = |l: f64, j: usize| {
            let guard = if just_changed.contains(&j) { 1e-9 } else { 1e-14 };
            l > 0.0 && l < lambda_cur * (1.0 - guard) && l.is_finite()
        };
        let mut events: Vec<(f64, usize, i8)> = Vec::new();
        for &j in &active {
            if b[j] != 0.0 {
                let l = a[j] / b[j];
                if below(l, j) {
                    events.push((l, j, 0));
                }
            }
        }
        for j in (0..k).filter(|&j| eta[j] == 0) {
            if q[j] < 1.0 {
                let l = p[j] / (1.0 - q[j]);
                if below(l, j) {
                    events.push((l, j, 1));
                }
            }
            if q[j] > -1.0 {
                let l = -p[j] / (1.0 + q[j]);
                if below(l, j) {
                    events.push((l, j, -1));
                }
            }
        }
        let next = events.iter().map(|e| e.0).fold(0.0f64, f64::max);
        segs_desc.push(Segment {
            lo: next,
            hi: lambda_cur,
            eta: eta.clone(),
            curvature: b.dot(&eta_vec(&eta)),
            intercept: a,
            slope: b,
        });
        if next == 0.0 {
            break;
        }
        if segs_desc.len() + 1 > max_segments {
            return Err(Error::Structure(format!(
                "lasso path exceeded the 3^k = {max_segments} segment bound"
            )));
        }
        let tol = EVENT_MERGE_TOL * next.max(1.0);
        let fired: Vec<&(f64, usize, i8)> = events.iter().filter(|e| next - e.0 <= tol).collect();
        let mut new_eta = eta.clone();
        for &&(_, j, s) in &fired {
            new_eta[j] = s;
        }
        if fired.len() > 1 {
            warnings.push(format!("{} simultaneous sign changes merged at lambda = {next}", fired.len()));
        }
        if !consistent_below(gram, &c, &new_eta, next)? {
            // fall back to the solver just below the event
            let probe = prox(penalty, next * (1.0 - 1e-9), theta)?;
            new_eta = signs(&probe.h);
            warnings.push(format!("path update at lambda = {next} resolved by direct solve"));
        }
        just_changed = (0..k).filter(|&j| new_eta[j] != eta[j]).collect();
        eta = new_eta;
        lambda_cur = next;
        breaks_desc.push(next);
    }

    breaks_desc.reverse();
    segs_desc.reverse();
    segs_desc.push(tail);
    let list = SegmentList { breakpoints: breaks_desc, segments: segs_desc, warnings };
    if list.segments.len() > max_segments {
        return Err(Error::Structure(format!(
            "lasso path has {} segments, more than 3^k = {max_segments}",
            list.segments.len()
        )));
    }
    Ok(list)
}

/// Compare the path against cold-start [`prox`] at each segment midpoint.
/// Returns the indices of segments whose sign pattern disagrees.
pub fn validate_against_prox(
    penalty: &PenaltySpec,
    theta: &DVector<f64>,
    list: &SegmentList,
) -> Result<Vec<usize>> {
    let mut bad = Vec::new();
    for (i, s) in list.segments.iter().enumerate() {
        let mid = if s.hi.is_finite() { 0.5 * (s.lo + s.hi) } else { s.lo * 2.0 + 1.0 };
        if mid <= s.lo || (s.hi.is_finite() && mid >= s.hi) {
            continue;
        }
        let p = prox(penalty, mid, theta)?;
        if p.eta != s.eta {
            bad.push(i);
        }
    }
    Ok(bad)
}

fn eta_vec(eta: &[i8]) -> DVector<f64> {
    DVector::from_iterator(eta.len(), eta.iter().map(|&e| e as f64))
}

/// Full-length `a`, `b` with zeros off the active set.
fn affine_pieces(gram: &DMatrix<f64>, c: &DVector<f64>, eta: &[i8]) -> Result<(DVector<f64>, DVector<f64>)> {
    let k = eta.len();
    let active: Vec<usize> = (0..k).filter(|&j| eta[j] != 0).collect();
    let mut a = DVector::zeros(k);
    let mut b = DVector::zeros(k);
    if active.is_empty() {
        return Ok((a, b));
    }
    let m = active.len();
    let gj = DMatrix::from_fn(m, m, |r, s| gram[(active[r], active[s])]);
    let chol = gj
        .cholesky()
        .ok_or_else(|| Error::Structure("singular active Gram matrix on the lasso path".into()))?;
    let aj = chol.solve(&DVector::from_fn(m, |r, _| c[active[r]]));
    let bj = chol.solve(&DVector::from_fn(m, |r, _| eta[active[r]] as f64));
    for (r, &j) in active.iter().enumerate() {
        a[j] = aj[r];
        b[j] = bj[r];
    }
    Ok((a, b))
}

/// Whether `eta` is the optimal pattern immediately below `lambda`: active
/// coefficients move in the direction of their sign and inactive
/// correlations stay inside `[-lambda, lambda]`.
fn consistent_below(gram: &DMatrix<f64>, c: &DVector<f64>, eta: &[i8], lambda: f64) -> Result<bool> {
    let (a, b) = affine_pieces(gram, c, eta)?;
    let probe = lambda * (1.0 - 1e-8);
    let h = &a - &b * probe;
    let r = c - gram * &h;
    let slack = 1e-9 * lambda.max(1.0);
    for j in 0..eta.len() {
        if eta[j] != 0 {
            if h[j] * eta[j] as f64 <= 0.0 {
                return Ok(false);
            }
        } else if r[j].abs() > probe + slack {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_breakpoints_are_abs_theta() {
        let p = PenaltySpec::lasso_identity(3).unwrap();
        let t = DVector::from_vec(vec![libm::sqrt(1.0 / 8.0), libm::sqrt(9.0 / 8.0), 2.0]);
        let s = lasso_breakpoints(&p, &t).unwrap();
        let want = [libm::sqrt(1.0 / 8.0), 3.0 / libm::sqrt(8.0), 2.0];
        assert_eq!(s.breakpoints.len(), 3);
        for (x, y) in s.breakpoints.iter().zip(want) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(s.segment_count(), 4);
        assert_eq!(s.segments[0].eta, vec![1, 1, 1]);
        assert_eq!(s.segments[3].eta, vec![0, 0, 0]);
        assert_eq!(s.curvature_per_segment(), vec![3.0, 2.0, 1.0, 0.0]);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn scalar_breakpoint() {
        let p = PenaltySpec::lasso(DMatrix::from_element(1, 1, 2.0)).unwrap();
        let s = lasso_breakpoints(&p, &DVector::from_element(1, 1.0)).unwrap();
        assert_eq!(s.breakpoints, vec![2.0]);
        assert!((s.h_at(0.0)[0] - 0.5).abs() < 1e-15);
        assert_eq!(s.h_at(3.0)[0], 0.0);
    }

    #[test]
    fn tied_coordinates_merge() {
        let p = PenaltySpec::lasso_identity(2).unwrap();
        let s = lasso_breakpoints(&p, &DVector::from_vec(vec![1.0, -1.0])).unwrap();
        assert_eq!(s.breakpoints, vec![1.0]);
        assert_eq!(s.segments[0].eta, vec![1, -1]);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn zero_theta() {
        let p = PenaltySpec::lasso_identity(2).unwrap();
        let s = lasso_breakpoints(&p, &DVector::zeros(2)).unwrap();
        assert!(s.breakpoints.is_empty());
        assert_eq!(s.segment_count(), 1);
    }

    #[test]
    fn general_matrix_matches_prox() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, -0.3, 0.2, 1.5, 0.1, -0.5, 0.3, 0.8]);
        let p = PenaltySpec::lasso(a).unwrap();
        let t = DVector::from_vec(vec![0.7, -1.2, 0.9]);
        let s = lasso_breakpoints(&p, &t).unwrap();
        assert!(validate_against_prox(&p, &t, &s).unwrap().is_empty());
        for l in [0.05, 0.3, 0.8, 1.4] {
            let h = s.h_at(l);
            let q = prox(&p, l, &t).unwrap();
            assert!((h - q.h).amax() < 1e-8);
        }
    }

    #[test]
    fn ridge_rejected() {
        let p = PenaltySpec::ridge_identity(2).unwrap();
        assert!(lasso_breakpoints(&p, &DVector::zeros(2)).is_err());
    }
}
