mod common;

use common::*;
use proptest::prelude::*;
use surecvlab_core::penalty::PenaltySpec;
use surecvlab_core::prox::{prox, signs};
use surecvlab_core::search::linear_grid;
use surecvlab_core::segments::{lasso_breakpoints, validate_against_prox};
use surecvlab_core::structure::{sawtooth_profile, supermodularity_gap, well_separation};
use surecvlab_core::sure::{segment_sure, sure, sure_curve, sure_from_prox};
use surecvlab_core::tuning::{minimize_sure, LambdaSet};
use surecvlab_core::{DMatrix, DVector};

fn ridge_fig() -> (PenaltySpec, DVector<f64>) {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 40.0]));
    (PenaltySpec::ridge(a).unwrap(), DVector::from_vec(vec![1.3893, 1.5]))
}

fn lasso_fig() -> (PenaltySpec, DVector<f64>) {
    let t = DVector::from_vec(vec![(1.0f64 / 8.0).sqrt(), (9.0f64 / 8.0).sqrt(), 2.0]);
    (PenaltySpec::lasso_identity(3).unwrap(), t)
}

/// Bias squared plus twice the degrees of freedom, as plotted for the diagonal Ridge example.
fn ridge_figure_value(lambda: f64, theta: &DVector<f64>, a: &[f64]) -> f64 {
    (0..a.len())
        .map(|j| {
            let w = lambda / (a[j] + lambda);
            w * w * theta[j] * theta[j] + 2.0 * a[j] / (a[j] + lambda)
        })
        .sum()
}

fn orthogonal_lasso_sure(lambda: f64, theta: &DVector<f64>) -> f64 {
    theta.iter().map(|t| lambda.min(t.abs()).powi(2) + if t.abs() > lambda { 2.0 } else { 0.0 }).sum::<f64>()
        - theta.len() as f64
}

#[test]
fn ridge_figure_offset_and_two_minima() {
    let (p, t) = ridge_fig();
    let grid = linear_grid(0.0, 50.0, 5001);
    let c = sure_curve(&p, &t, &DMatrix::identity(2, 2), &grid).unwrap();
    for (l, v) in c.lambdas.iter().zip(&c.values) {
        assert!((v - (ridge_figure_value(*l, &t, &[1.0, 40.0]) - 2.0)).abs() < 1e-9);
    }
    assert_eq!(c.local_minima().len(), 2);
}

#[test]
fn lasso_figure_two_global_minima() {
    let (p, t) = lasso_fig();
    let s = DMatrix::identity(3, 3);
    let a = sure(&p, 1.0 / 8f64.sqrt(), &t, &s).unwrap();
    let b = sure(&p, 3.0 / 8f64.sqrt(), &t, &s).unwrap();
    assert!((a - 1.375).abs() < 1e-9 && (b - 1.375).abs() < 1e-9);
    for l in linear_grid(0.01, 3.0, 300) {
        assert!((sure(&p, l, &t, &s).unwrap() - orthogonal_lasso_sure(l, &t)).abs() < 1e-9);
    }
    let m = minimize_sure(&p, &t, &s, &LambdaSet::AllNonneg).unwrap();
    assert!((m.lambda_star - 1.0 / 8f64.sqrt()).abs() < 1e-12);
    assert_eq!(m.ties.len(), 2);
}

#[test]
fn ridge_full_shrinkage_limit() {
    let mut rng = rng(2);
    let p = PenaltySpec::ridge(random_spd(&mut rng, 3)).unwrap();
    let t = normal_vec(&mut rng, 3) * 3.0;
    let s = random_psd(&mut rng, 3);
    let v = sure(&p, 1e12, &t, &s).unwrap();
    let want = t.norm_squared() - s.trace();
    assert!(((v - want) / want).abs() < 1e-6);
}

#[test]
fn ridge_minimiser_matches_dense_grid() {
    let (p, t) = ridge_fig();
    let s = DMatrix::identity(2, 2);
    let m = minimize_sure(&p, &t, &s, &LambdaSet::AllNonneg).unwrap();
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=1_000_000 {
        let l = 100.0 * i as f64 / 1e6;
        let v = ridge_figure_value(l, &t, &[1.0, 40.0]);
        if v < best.0 {
            best = (v, l);
        }
    }
    assert!((m.lambda_star - best.1).abs() < 1e-4, "{} vs {}", m.lambda_star, best.1);
}

#[test]
fn breakpoints_on_random_instances_match_cold_start() {
    let mut rng = rng(13);
    for _ in 0..20 {
        let a = random_invertible(&mut rng, 3);
        let p = PenaltySpec::lasso(a).unwrap();
        let t = normal_vec(&mut rng, 3) * 2.0;
        let segs = lasso_breakpoints(&p, &t).unwrap();
        assert!(validate_against_prox(&p, &t, &segs).unwrap().is_empty());
        let top = *segs.breakpoints.last().unwrap();
        for _ in 0..100 {
            let l = uniform(&mut rng, 0.0, 1.2 * top);
            let cold = prox(&p, l, &t).unwrap();
            if cold.boundary {
                continue;
            }
            assert_eq!(segs.segments[segs.segment_index(l)].eta, cold.eta);
            assert_eq!(signs(&segs.h_at(l)), cold.eta);
        }
        for w in segs.segments.windows(2) {
            assert_ne!(w[0].eta, w[1].eta);
        }
        for s in &segs.segments {
            assert!(s.curvature >= 0.0);
            if s.eta.iter().any(|&e| e != 0) {
                assert!(s.curvature > 0.0);
            }
        }
    }
}

#[test]
fn supermodularity_examples() {
    let (p, _) = ridge_fig();
    let nu = DVector::from_vec(vec![0.68, 0.73]).normalize();
    let rs = linear_grid(0.5, 4.0, 10);
    let ls = linear_grid(0.1, 50.0, 20);
    assert!(supermodularity_gap(&p, &nu, &rs, &ls, &DMatrix::identity(2, 2)).unwrap() > 0.0);
}

#[test]
fn sawtooth_on_figure_direction() {
    let (p, t) = lasso_fig();
    let nu = t.normalize();
    let s = DMatrix::identity(3, 3);
    let rs = linear_grid(0.2, 8.0, 200);
    let prof = sawtooth_profile(&p, &nu, &rs, &s).unwrap();
    assert!(prof.windows(2).all(|w| w[1].segment_index <= w[0].segment_index));
    assert!(prof.windows(2).any(|w| w[1].segment_index < w[0].segment_index));
    // the figure point is the transition radius between breakpoints 1 and 2
    let r = t.norm();
    let unit = lasso_breakpoints(&p, &nu).unwrap();
    let v1 = segment_sure(&p, r * unit.breakpoints[0], &t, &s, &unit.segments[1].eta);
    let v2 = segment_sure(&p, r * unit.breakpoints[1], &t, &s, &unit.segments[2].eta);
    assert!((v1 - v2).abs() < 1e-9);
}

#[test]
fn sawtooth_scaling_keeps_breakpoint_set() {
    let mut rng = rng(17);
    for _ in 0..20 {
        let p = PenaltySpec::lasso(random_invertible(&mut rng, 3)).unwrap();
        let nu = normal_vec(&mut rng, 3).normalize();
        let s = DMatrix::identity(3, 3);
        let unit = lasso_breakpoints(&p, &nu).unwrap();
        let mut knots = vec![0.0];
        knots.extend(unit.breakpoints.iter().copied());
        let r = uniform(&mut rng, 0.5, 5.0);
        let c = uniform(&mut rng, 0.3, 3.0);
        for rr in [r, c * r] {
            let prof = sawtooth_profile(&p, &nu, &[rr], &s).unwrap();
            let ratio = prof[0].lambda_over_r();
            assert!(knots.iter().any(|k| (k - ratio).abs() <= 1e-9 * k.max(1.0)));
        }
    }
}

#[test]
fn well_separation_examples() {
    let (p, t) = lasso_fig();
    let s = DMatrix::identity(3, 3);
    assert!(well_separation(&p, &t, &s, 1.0 / 8f64.sqrt(), 0.1).unwrap().abs() <= 1e-9);
    let mut t2 = t.clone();
    t2[1] += 0.1;
    let m = minimize_sure(&p, &t2, &s, &LambdaSet::AllNonneg).unwrap();
    assert!(well_separation(&p, &t2, &s, m.lambda_star, 0.1).unwrap() > 0.0);
    // the third coordinate does not enter either tied value
    let mut t3 = t.clone();
    t3[2] = 2.1;
    assert!(well_separation(&p, &t3, &s, 1.0 / 8f64.sqrt(), 0.1).unwrap().abs() <= 1e-9);

    let p1 = PenaltySpec::ridge_identity(1).unwrap();
    let t1 = DVector::from_element(1, 2.0);
    let s1 = DMatrix::identity(1, 1);
    let m = minimize_sure(&p1, &t1, &s1, &LambdaSet::AllNonneg).unwrap();
    let gap = well_separation(&p1, &t1, &s1, m.lambda_star, 0.05).unwrap();
    // dense scalar grid
    let mut inf = f64::INFINITY;
    for i in 0..200_000 {
        let l = i as f64 * 1e-4;
        if (l - m.lambda_star).abs() > 0.05 {
            inf = inf.min(sure(&p1, l, &t1, &s1).unwrap());
        }
    }
    assert!(gap > 0.0 && gap <= inf - m.sure_star + 1e-9);
}

#[test]
fn zero_lambda_gives_trace() {
    let mut rng = rng(19);
    for _ in 0..10 {
        let s = random_psd(&mut rng, 3);
        let t = normal_vec(&mut rng, 3);
        for p in [
            PenaltySpec::ridge(random_spd(&mut rng, 3)).unwrap(),
            PenaltySpec::lasso(random_invertible(&mut rng, 3)).unwrap(),
        ] {
            assert_eq!(sure(&p, 0.0, &t, &s).unwrap(), s.trace());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lasso_segments_are_quadratic_in_lambda(seed in any::<u64>(), k in 1usize..=4) {
        let mut r = rng(seed);
        let p = PenaltySpec::lasso(random_invertible(&mut r, k)).unwrap();
        let t = normal_vec(&mut r, k) * 2.0;
        let s = random_psd(&mut r, k);
        let segs = lasso_breakpoints(&p, &t).unwrap();
        prop_assert!(segs.segment_count() <= 3usize.pow(k as u32));
        for seg in &segs.segments {
            let hi = if seg.hi.is_finite() { seg.hi } else { seg.lo + 1.0 };
            let consts: Vec<f64> = (1..4)
                .map(|i| {
                    let l = seg.lo + (hi - seg.lo) * i as f64 / 4.0;
                    let res = prox(&p, l, &t).unwrap();
                    sure_from_prox(&res, &s) - l * l * seg.curvature
                })
                .collect();
            for c in &consts {
                prop_assert!((c - consts[0]).abs() <= 1e-9 * consts[0].abs().max(1.0));
            }
        }
    }

    #[test]
    fn lasso_scaling_identity(seed in any::<u64>(), r_scale in 0.1f64..5.0, lambda in 0.01f64..2.0) {
        let mut r = rng(seed);
        let p = PenaltySpec::lasso(random_invertible(&mut r, 3)).unwrap();
        let nu = normal_vec(&mut r, 3).normalize();
        let s = random_psd(&mut r, 3);
        let lhs = sure(&p, r_scale * lambda, &(&nu * r_scale), &s).unwrap();
        let unit = prox(&p, lambda, &nu).unwrap();
        let unit = if unit.boundary { prox(&p, lambda * (1.0 + 1e-12), &nu).unwrap() } else { unit };
        let mut tr = 0.0;
        for i in 0..3 { for j in 0..3 { tr += unit.grad_g[(i, j)] * s[(j, i)]; } }
        let rhs = s.trace() + r_scale * r_scale * unit.g.norm_squared() + 2.0 * tr;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn ridge_tuning_decreases_in_radius(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = PenaltySpec::ridge(random_spd(&mut r, 2)).unwrap();
        let nu = normal_vec(&mut r, 2).normalize();
        let s = DMatrix::identity(2, 2);
        let mut last = f64::INFINITY;
        for rr in linear_grid(0.5, 6.0, 12) {
            let m = minimize_sure(&p, &(&nu * rr), &s, &LambdaSet::AllNonneg).unwrap();
            prop_assert!(m.lambda_star <= last * (1.0 + 1e-6) + 1e-6);
            last = m.lambda_star;
        }
        let gap = supermodularity_gap(&p, &nu, &linear_grid(0.5, 6.0, 8), &linear_grid(0.1, 20.0, 10), &s).unwrap();
        prop_assert!(gap > 0.0);
    }

    #[test]
    fn ridge_sure_continuity_in_theta(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = PenaltySpec::ridge(random_spd(&mut r, 3)).unwrap();
        let s = random_psd(&mut r, 3);
        let a = normal_vec(&mut r, 3) * 2.0;
        let b = &a + normal_vec(&mut r, 3) * 0.3;
        let bound = (&b - &a).norm() * (&b + &a).norm() + 1e-9;
        for l in linear_grid(0.0, 20.0, 41) {
            let d = (sure(&p, l, &b, &s).unwrap() - sure(&p, l, &a, &s).unwrap()).abs();
            prop_assert!(d <= bound);
        }
    }
}
