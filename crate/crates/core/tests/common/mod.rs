#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use surecvlab_core::{DMatrix, DVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, k: usize) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.sample(StandardNormal))
}

pub fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Invertible, moderately conditioned.
pub fn random_invertible(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    loop {
        let a = normal_mat(rng, k, k) * 0.5 + DMatrix::identity(k, k);
        let sv = a.clone().svd(false, false).singular_values;
        if sv.max() / sv.min() < 50.0 {
            return a;
        }
    }
}

pub fn random_spd(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let b = normal_mat(rng, k, k);
    &b * b.transpose() / k as f64 + DMatrix::identity(k, k) * 0.2
}

pub fn random_psd(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let b = normal_mat(rng, k, k);
    &b * b.transpose() / k as f64
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn lasso_objective(a: &DMatrix<f64>, theta: &DVector<f64>, lambda: f64, h: &DVector<f64>) -> f64 {
    0.5 * (a * h - theta).norm_squared() + lambda * h.abs().sum()
}

/// Proximal-gradient descent from many random starts; keeps the best end point.
pub fn lasso_multistart_oracle(
    a: &DMatrix<f64>,
    theta: &DVector<f64>,
    lambda: f64,
    starts: usize,
    rng: &mut ChaCha8Rng,
) -> DVector<f64> {
    let k = a.ncols();
    let g = a.transpose() * a;
    let c = a.transpose() * theta;
    let step = 1.0 / g.clone().symmetric_eigen().eigenvalues.max();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for _ in 0..starts {
        let mut h = normal_vec(rng, k) * 3.0;
        for _ in 0..20_000 {
            let z = &h - (&g * &h - &c) * step;
            let next = z.map(|v| v.signum() * (v.abs() - step * lambda).max(0.0));
            let done = (&next - &h).amax() < 1e-15;
            h = next;
            if done {
                break;
            }
        }
        let f = lasso_objective(a, theta, lambda, &h);
        if best.as_ref().map_or(true, |b| f < b.0) {
            best = Some((f, h));
        }
    }
    best.unwrap().1
}

/// Exhaustive search over all `3^k` sign patterns for the one satisfying the
/// optimality conditions.
pub fn lasso_enumeration_oracle(a: &DMatrix<f64>, theta: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let k = a.ncols();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..3usize.pow(k as u32) {
        let mut eta = vec![0i32; k];
        let mut c = code;
        for e in eta.iter_mut() {
            *e = (c % 3) as i32 - 1;
            c /= 3;
        }
        let act: Vec<usize> = (0..k).filter(|&j| eta[j] != 0).collect();
        let mut h = DVector::zeros(k);
        if !act.is_empty() {
            let aj = DMatrix::from_fn(k, act.len(), |r, s| a[(r, act[s])]);
            let e = DVector::from_fn(act.len(), |r, _| eta[act[r]] as f64);
            let hj = (aj.transpose() * &aj).try_inverse().unwrap() * (aj.transpose() * theta - e * lambda);
            if act.iter().enumerate().any(|(r, &j)| hj[r] * eta[j] as f64 <= 0.0) {
                continue;
            }
            for (r, &j) in act.iter().enumerate() {
                h[j] = hj[r];
            }
        }
        let f = lasso_objective(a, theta, lambda, &h);
        if best.as_ref().map_or(true, |b| f < b.0) {
            best = Some((f, h));
        }
    }
    best.unwrap().1
}
