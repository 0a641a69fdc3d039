//! James-Stein risk curves.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::seed::replication_rng;
use crate::LabError;

/// Draws per parallel block; blocks are seeded independently.
const BLOCK: usize = 10_000;

/// Series terms are summed until they fall below this (past the Poisson mode).
pub const SERIES_TAIL_TOL: f64 = 1e-12;

/// Shrinkage rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsVariant {
    /// `(1 - (k-2)/||x||^2) x`.
    Plain,
    /// `max(0, 1 - (k-2)/||x||^2) x`.
    PositivePart,
}

impl std::str::FromStr for JsVariant {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self, LabError> {
        match s {
            "plain" | "Plain" => Ok(JsVariant::Plain),
            "positive-part" | "positive_part" | "PositivePart" => Ok(JsVariant::PositivePart),
            _ => Err(LabError::Config(format!("unknown James-Stein variant '{s}'"))),
        }
    }
}

/// Monte Carlo estimate of `E||theta_JS - theta||^2 / k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JsEstimate {
    /// Normalised risk.
    pub risk: f64,
    /// Standard error.
    pub stderr: f64,
}

/// Risk at `||theta|| = norm_theta` in dimension `k`, by simulation of
/// `x ~ N(theta, I)` with `theta = norm_theta e_1` (the risk depends on
/// `theta` only through its norm).
pub fn js_risk(norm_theta: f64, k: usize, variant: JsVariant, reps: usize, seed: u64) -> Result<JsEstimate, LabError> {
    if k < 3 {
        return Err(LabError::Config(format!("James-Stein needs k >= 3, got {k}")));
    }
    if !(norm_theta >= 0.0 && norm_theta.is_finite()) {
        return Err(LabError::Config("norm_theta must be finite and non-negative".into()));
    }
    if reps == 0 {
        return Err(LabError::Config("reps must be at least 1".into()));
    }
    let blocks = reps.div_ceil(BLOCK);
    let tag = norm_theta.to_bits();
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = replication_rng(seed, tag, b as u64);
            let count = BLOCK.min(reps - b * BLOCK);
            let mut z = vec![0.0; k];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                // x = theta + z; loss = ||c x - theta||^2 with c the shrink factor
                let x0 = norm_theta + z[0];
                let sq = x0 * x0 + z[1..].iter().map(|v| v * v).sum::<f64>();
                let mut c = 1.0 - (k - 2) as f64 / sq;
                if variant == JsVariant::PositivePart {
                    c = c.max(0.0);
                }
                let e0 = c * x0 - norm_theta;
                let loss = (e0 * e0 + c * c * (sq - x0 * x0)) / k as f64;
                s += loss;
                s2 += loss * loss;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let r = reps as f64;
    let mean = s / r;
    let stderr = if reps > 1 { ((s2 - r * mean * mean).max(0.0) / (r - 1.0) / r).sqrt() } else { 0.0 };
    Ok(JsEstimate { risk: mean, stderr })
}

/// Exact normalised risk of the plain estimator,
/// `(k - (k-2)^2 E[1/(k - 2 + 2K)]) / k` with `K ~ Poisson(||theta||^2 / 2)`.
pub fn js_series(norm_theta: f64, k: usize) -> Result<f64, LabError> {
    if k < 3 {
        return Err(LabError::Config(format!("James-Stein needs k >= 3, got {k}")));
    }
    if !(norm_theta >= 0.0 && norm_theta.is_finite()) {
        return Err(LabError::Config("norm_theta must be finite and non-negative".into()));
    }
    let kf = k as f64;
    let mu = 0.5 * norm_theta * norm_theta;
    let mut expect = 0.0;
    let mut j = 0usize;
    loop {
        let jf = j as f64;
        let logp = if mu == 0.0 {
            if j == 0 { 0.0 } else { f64::NEG_INFINITY }
        } else {
            -mu + jf * mu.ln() - libm::lgamma(jf + 1.0)
        };
        let term = logp.exp() / (kf - 2.0 + 2.0 * jf);
        expect += term;
        if jf > mu && term < SERIES_TAIL_TOL {
            break;
        }
        j += 1;
    }
    Ok((kf - (kf - 2.0).powi(2) * expect) / kf)
}
