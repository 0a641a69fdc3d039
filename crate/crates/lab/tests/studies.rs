//! Simulation-level checks: DGPs, regret, Monte Carlo risk, James-Stein
//! curves, and the finite-n approximation properties that need a DGP.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use surecvlab::dgp::{simulate_dataset, DgpSpec};
use surecvlab::js::{js_risk, js_series, JsVariant};
use surecvlab::regret::oos_regret;
use surecvlab::study::{
    cv_loss_sample, limit_loss_sample, loss_distribution_compare, risk_cv, risk_sure_limit, McConfig,
};
use surecvlab_core::cv::{tune_cv, CvMode};
use surecvlab_core::erm::{
    fit_erm, fit_penalized, influence_estimate, loo_exact, softplus, sigmoid, ThetaSource,
};
use surecvlab_core::penalty::PenaltySpec;
use surecvlab_core::prox::prox;
use surecvlab_core::search::log_grid;
use surecvlab_core::tuning::{minimize_sure, LambdaSet};
use surecvlab_core::{DMatrix, DVector};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}

#[test]
fn datasets_are_reproducible_and_distinct() {
    let dgp = DgpSpec::linear(v(&[1.0, -2.0]), 1.0);
    let a = simulate_dataset(&dgp, 50, 3, 7).unwrap();
    let b = simulate_dataset(&dgp, 50, 3, 7).unwrap();
    assert_eq!(a.w(), b.w());
    assert_eq!(a.y(), b.y());
    let c = simulate_dataset(&dgp, 50, 3, 8).unwrap();
    assert_ne!(a.y(), c.y());
    assert!(simulate_dataset(&dgp, 2, 3, 0).is_err());
}

#[test]
fn pure_noise_outcomes_are_uncorrelated() {
    let n = 4000;
    let d = simulate_dataset(&DgpSpec::linear(v(&[0.0, 0.0, 0.0]), 1.0), n, 1, 0).unwrap();
    let y = d.y();
    for j in 0..3 {
        let w = d.w().column(j);
        let corr = w.dot(y) / (w.norm() * y.norm());
        // null sd is 1/sqrt(n); 4 sd band
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "column {j}: {corr}");
    }
}

#[test]
fn erm_error_has_limit_scale() {
    // ||theta_hat - theta0|| is approximately chi with 3 degrees of freedom,
    // whose median is sqrt(2.366) = 1.538
    let dgp = DgpSpec::linear(v(&[2.0, 0.0, 0.0]), 1.0);
    let errs: Vec<f64> = (0..200)
        .map(|r| {
            let d = simulate_dataset(&dgp, 400, 11, r).unwrap();
            (fit_erm(dgp.model, &d).unwrap() - &dgp.theta0).norm()
        })
        .collect();
    let m = median(errs);
    assert!((1.25..1.85).contains(&m), "median {m}");
}

#[test]
fn logistic_regret_matches_monte_carlo() {
    let dgp = DgpSpec::logistic(v(&[1.0, -1.0, 0.5]));
    let n = 400;
    let theta = v(&[1.3, -0.8, 0.4]);
    let quad = oos_regret(&dgp, n, &theta).unwrap();
    // oracle: simulate (W, Y) and average n (l(theta) - l(theta0))
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let sn = (n as f64).sqrt();
    let draws = 10_000_000usize;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let (mut u, mut u0) = (0.0, 0.0);
        for j in 0..3 {
            let w = 2.0 * rng.sample::<f64, _>(StandardNormal);
            u += w * theta[j] / sn;
            u0 += w * dgp.theta0[j] / sn;
        }
        let y = if rng.random::<f64>() < sigmoid(u0) { 1.0 } else { 0.0 };
        let d = n as f64 * ((softplus(u) - y * u) - (softplus(u0) - y * u0));
        s += d;
        s2 += d * d;
    }
    let mean = s / draws as f64;
    let se = ((s2 / draws as f64 - mean * mean) / draws as f64).sqrt();
    assert!((quad - mean).abs() < 3.0 * se, "quadrature {quad}, monte carlo {mean} +- {se}");
    // and near the local quadratic approximation
    let q = 0.5 * (&theta - &dgp.theta0).norm_squared();
    assert!((quad - q).abs() < 0.05 * q, "{quad} vs {q}");
}

#[test]
fn cv_tuned_ridge_beats_no_shrinkage_at_origin() {
    let k = 10;
    let dgp = DgpSpec::linear(DVector::zeros(k), 1.0);
    let pen = PenaltySpec::ridge_identity(k).unwrap();
    let grid = log_grid(0.01, 1e4, 20);
    let cfg = McConfig::new(vec![400], 2000, 17);
    let r = risk_cv(&dgp, 400, &pen, &grid, CvMode::ApproxLoo, &cfg).unwrap();
    // unpenalised risk is E[1/2 ||theta_hat - theta0||^2] = k/2
    let untuned = k as f64 / 2.0;
    assert!(r.mean + 3.0 * r.stderr < untuned, "{r:?}");
    assert_eq!(r.failures, 0);
}

#[test]
fn truncation_and_single_replication() {
    let dgp = DgpSpec::linear(v(&[1.0, 1.0]), 1.0);
    let pen = PenaltySpec::ridge_identity(2).unwrap();
    let grid = [0.1, 1.0, 10.0];
    let mut cfg = McConfig::new(vec![100], 50, 2);
    cfg.truncation_m = 1e-6;
    let r = risk_cv(&dgp, 100, &pen, &grid, CvMode::ExactLoo, &cfg).unwrap();
    assert!((r.mean - 1e-6).abs() < 1e-9, "{r:?}");
    cfg.truncation_m = 50.0;
    cfg.replications = 1;
    let r = risk_cv(&dgp, 100, &pen, &grid, CvMode::ExactLoo, &cfg).unwrap();
    assert_eq!(r.stderr, 0.0);
    assert!(!r.warnings.is_empty());
    cfg.replications = 0;
    assert!(risk_cv(&dgp, 100, &pen, &grid, CvMode::ExactLoo, &cfg).is_err());
}

#[test]
fn limit_risk_without_tuning_is_half_k() {
    let k = 3;
    let pen = PenaltySpec::ridge_identity(k).unwrap();
    let cfg = McConfig { sample_sizes: vec![], replications: 20_000, master_seed: 5, truncation_m: 1e6 };
    let r = risk_sure_limit(&v(&[1.0, 2.0, 0.0]), &DMatrix::identity(k, k), &pen, &LambdaSet::FiniteGrid(vec![0.0]), &cfg)
        .unwrap();
    assert!((r.mean - 1.5).abs() < 3.0 * r.stderr, "{r:?}");
}

#[test]
fn degenerate_limit_is_deterministic() {
    let theta0 = v(&[1.0, -0.5]);
    let pen = PenaltySpec::lasso_identity(2).unwrap();
    let sigma = DMatrix::zeros(2, 2);
    let set = LambdaSet::FiniteGrid(vec![0.0, 0.25, 0.75]);
    let cfg = McConfig::new(vec![], 20, 3);
    let s = limit_loss_sample(&theta0, &sigma, &pen, &set, &cfg).unwrap();
    let m = minimize_sure(&pen, &theta0, &sigma, &set).unwrap();
    let g = prox(&pen, m.lambda_star, &theta0).unwrap().g;
    let expect = 0.5 * g.norm_squared();
    assert!(s.losses.iter().all(|&l| l == expect), "{:?} vs {expect}", s.losses);
}

/// SURE-tuned ridge with A = I, Sigma = I: SURE(s) = k + s^2 ||x||^2 - 2 k s in
/// the shrinkage fraction s = lambda / (1 + lambda), so the tuned estimator
/// is (1 - min(k / ||x||^2, 1)) x. Simulated directly as an oracle.
fn tuned_ridge_origin_oracle(k: usize, reps: usize, m: f64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..reps {
        let x: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let c = 1.0 - (k as f64 / sq).min(1.0);
        let loss = (0.5 * c * c * sq).min(m);
        s += loss;
        s2 += loss * loss;
    }
    let mean = s / reps as f64;
    (mean, ((s2 / reps as f64 - mean * mean) / reps as f64).sqrt())
}

#[test]
fn sure_tuned_ridge_at_origin_matches_oracle() {
    let k = 10;
    let pen = PenaltySpec::ridge_identity(k).unwrap();
    let cfg = McConfig { sample_sizes: vec![], replications: 100_000, master_seed: 8, truncation_m: 100.0 };
    let r = risk_sure_limit(&DVector::zeros(k), &DMatrix::identity(k, k), &pen, &LambdaSet::AllNonneg, &cfg).unwrap();
    let (o, ose) = tuned_ridge_origin_oracle(k, 1_000_000, 100.0);
    let se = (r.stderr.powi(2) + ose.powi(2)).sqrt();
    // the search range tops out at lambda = 1e6, i.e. shrinkage 1 - 1e-6
    assert!((r.mean - o).abs() < 3.0 * se + 1e-4, "{} vs oracle {o}", r.mean);
    let normalized = 2.0 * r.mean / k as f64;
    assert!((0.05..0.08).contains(&normalized), "{normalized}");
}

#[test]
#[ignore = "documented band [0.17, 0.23] is inconsistent with the exact tuned estimator (~0.066)"]
fn sure_tuned_ridge_at_origin_literal_band() {
    let k = 10;
    let pen = PenaltySpec::ridge_identity(k).unwrap();
    let cfg = McConfig { sample_sizes: vec![], replications: 100_000, master_seed: 8, truncation_m: 100.0 };
    let r = risk_sure_limit(&DVector::zeros(k), &DMatrix::identity(k, k), &pen, &LambdaSet::AllNonneg, &cfg).unwrap();
    let normalized = 2.0 * r.mean / k as f64;
    assert!((0.17..=0.23).contains(&normalized), "{normalized}");
}

#[test]
fn js_monte_carlo_agrees_with_series() {
    for &norm in &[0.0, 1.0, 2.0, 4.0, 6.0] {
        let mc = js_risk(norm, 10, JsVariant::Plain, 200_000, 31).unwrap();
        let exact = js_series(norm, 10).unwrap();
        assert!((mc.risk - exact).abs() < 3.0 * mc.stderr, "norm {norm}: {} +- {} vs {exact}", mc.risk, mc.stderr);
    }
}

#[test]
fn js_curves_are_monotone() {
    for variant in [JsVariant::Plain, JsVariant::PositivePart] {
        let pts: Vec<_> =
            (0..=12).map(|i| js_risk(0.5 * i as f64, 10, variant, 50_000, 4).unwrap()).collect();
        for w in pts.windows(2) {
            assert!(w[1].risk >= w[0].risk - 2.0 * w[1].stderr.max(w[0].stderr), "{variant:?}: {w:?}");
        }
    }
}

#[test]
fn positive_part_dominates_plain() {
    for &norm in &[0.0, 2.0, 5.0] {
        // same seed, so the comparison is pathwise
        let p = js_risk(norm, 10, JsVariant::Plain, 50_000, 9).unwrap();
        let q = js_risk(norm, 10, JsVariant::PositivePart, 50_000, 9).unwrap();
        assert!(q.risk <= p.risk + 1e-12);
    }
}

#[test]
fn studies_do_not_depend_on_thread_count() {
    let dgp = DgpSpec::linear(v(&[1.0, 0.5, 0.0]), 1.0);
    let pen = PenaltySpec::lasso_identity(3).unwrap();
    let grid = [0.0, 0.3, 0.6, 1.2];
    let cfg = McConfig::new(vec![100], 64, 77);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let a = cv_loss_sample(&dgp, 100, &pen, &grid, CvMode::ApproxLoo, &cfg).unwrap();
            let b = limit_loss_sample(&dgp.theta0, &dgp.limit_sigma().unwrap(), &pen, &LambdaSet::AllNonneg, &cfg).unwrap();
            let j = js_risk(1.0, 10, JsVariant::Plain, 35_000, 5).unwrap();
            (a, b, j.risk.to_bits())
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn ks_of_identical_samples_and_smoke() {
    let dgp = DgpSpec::linear(v(&[1.0, 0.0]), 1.0);
    let pen = PenaltySpec::ridge_identity(2).unwrap();
    let grid = log_grid(0.01, 100.0, 10);
    let cfg = McConfig::new(vec![200], 200, 1);
    let ks = loss_distribution_compare(&dgp, 200, &pen, &grid, CvMode::ApproxLoo, &cfg).unwrap();
    assert!((0.0..=1.0).contains(&ks));
    let s = cv_loss_sample(&dgp, 200, &pen, &grid, CvMode::ApproxLoo, &cfg).unwrap();
    assert_eq!(surecvlab::ks::ks_two_sample(&s.losses, &s.losses), 0.0);
}

#[test]
fn influence_error_shrinks_with_n() {
    // logistic: strictly decreasing medians of ||theta_hat - theta_tilde||
    let dgp = DgpSpec::logistic(v(&[1.0, -1.0, 0.5]));
    let meds: Vec<f64> = [100usize, 400, 1600]
        .iter()
        .map(|&n| {
            median(
                (0..200)
                    .map(|r| {
                        let d = simulate_dataset(&dgp, n, 21, r).unwrap();
                        let th = fit_erm(dgp.model, &d).unwrap();
                        let tt = influence_estimate(dgp.model, &d, &dgp.local_theta0(n), ThetaSource::Known)
                            .unwrap()
                            .theta_tilde;
                        (th - tt).norm()
                    })
                    .collect(),
            )
        })
        .collect();
    assert!(meds[0] > meds[1] && meds[1] > meds[2], "{meds:?}");
}

#[test]
fn penalized_influence_error_shrinks_with_n() {
    let dgp = DgpSpec::logistic(v(&[1.0, -1.0, 0.5]));
    let pen = PenaltySpec::ridge_identity(3).unwrap();
    let grid = log_grid(0.01, 100.0, 20);
    let meds: Vec<f64> = [100usize, 400, 1600]
        .iter()
        .map(|&n| {
            median(
                (0..60)
                    .map(|r| {
                        let d = simulate_dataset(&dgp, n, 23, r).unwrap();
                        let tt = influence_estimate(dgp.model, &d, &dgp.local_theta0(n), ThetaSource::Known)
                            .unwrap()
                            .theta_tilde;
                        let mut warm: Option<DVector<f64>> = None;
                        let mut sup: f64 = 0.0;
                        for &l in grid.iter().rev() {
                            let th = fit_penalized(dgp.model, &d, &pen, l, warm.as_ref()).unwrap();
                            let g = prox(&pen, l, &tt).unwrap().fitted;
                            sup = sup.max((&th - g).norm());
                            warm = Some(th);
                        }
                        sup
                    })
                    .collect(),
            )
        })
        .collect();
    assert!(meds[0] > meds[1] && meds[1] > meds[2], "{meds:?}");
}

#[test]
fn loo_displacement_is_order_root_n() {
    // max_i sup_lambda ||theta^{lambda,-i} - theta^lambda|| * sqrt(n) stays in a band
    let dgp = DgpSpec::linear(v(&[1.0, 0.5]), 1.0);
    let pen = PenaltySpec::ridge_identity(2).unwrap();
    let grid = log_grid(0.01, 100.0, 8);
    let stat = |n: usize| {
        median(
            (0..40)
                .map(|r| {
                    let d = simulate_dataset(&dgp, n, 29, r).unwrap();
                    let mut sup: f64 = 0.0;
                    for &l in &grid {
                        let full = fit_penalized(dgp.model, &d, &pen, l, None).unwrap();
                        let loo = loo_exact(dgp.model, &d, &pen, l).unwrap();
                        for i in 0..n {
                            sup = sup.max((loo.row(i).transpose() - &full).norm());
                        }
                    }
                    sup * (n as f64).sqrt()
                })
                .collect(),
        )
    };
    let (a, b) = (stat(100), stat(400));
    assert!(b < 2.0 * a && b > 0.5 * a, "{a} -> {b}");
}

#[test]
fn cv_picks_the_limit_optimum_on_a_separated_instance() {
    // the limit experiment's modal lambda* is the oracle
    let dgp = DgpSpec::linear(v(&[3.0, 3.0, 3.0]), 1.0);
    let pen = PenaltySpec::lasso_identity(3).unwrap();
    let grid = vec![0.0, 0.5, 1.5];
    let sigma = dgp.limit_sigma().unwrap();
    let set = LambdaSet::FiniteGrid(grid.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut counts = [0usize; 3];
    for _ in 0..20_000 {
        let z = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = minimize_sure(&pen, &(&dgp.theta0 + z), &sigma, &set).unwrap();
        counts[grid.iter().position(|&l| l == m.lambda_star).unwrap()] += 1;
    }
    let (mode, &top) = counts.iter().enumerate().max_by_key(|c| *c.1).unwrap();
    assert!(top as f64 / 20_000.0 > 0.7, "limit is not well separated: {counts:?}");
    let hits = (0..200)
        .filter(|&r| {
            let d = simulate_dataset(&dgp, 2000, 41, r).unwrap();
            tune_cv(dgp.model, &d, &pen, &grid, CvMode::ApproxLoo).unwrap().lambda_star == grid[mode]
        })
        .count();
    assert!(hits as f64 / 200.0 >= 0.6, "{hits}/200 hit lambda = {}", grid[mode]);
}

#[test]
#[ignore = "expensive (5 x 3 x 2000 replications at n up to 3200); differences are within Monte Carlo noise"]
fn truncated_risk_gap_shrinks() {
    let dgp = DgpSpec::linear(v(&[1.5, 0.5, 0.0]), 1.0);
    let pen = PenaltySpec::ridge_identity(3).unwrap();
    let grid = log_grid(0.01, 100.0, 25);
    let set = LambdaSet::FiniteGrid(grid.clone());
    let meds: Vec<f64> = [200usize, 800, 3200]
        .iter()
        .map(|&n| {
            median(
                (0..5u64)
                    .map(|s| {
                        let cfg = McConfig::new(vec![n], 2000, 1000 + s);
                        let lim = risk_sure_limit(&dgp.theta0, &dgp.limit_sigma().unwrap(), &pen, &set, &cfg).unwrap();
                        let fin = risk_cv(&dgp, n, &pen, &grid, CvMode::ApproxLoo, &cfg).unwrap();
                        (fin.mean - lim.mean).abs()
                    })
                    .collect(),
            )
        })
        .collect();
    assert!(meds[0] > meds[1] && meds[1] > meds[2], "{meds:?}");
}
