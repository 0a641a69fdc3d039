//! Out-of-sample regret `L_bar_n(theta, theta0) = n E[l_n(theta, Z) - l_n(theta0, Z)]`.

use std::sync::OnceLock;

use surecvlab_core::erm::{sigmoid, softplus, LossModel};
use surecvlab_core::{DMatrix, DVector};

use crate::dgp::DgpSpec;
use crate::study::psd_sqrt;
use crate::LabError;

/// Successive Gauss-Hermite rules must agree to this (absolute) tolerance.
pub const QUADRATURE_TOL: f64 = 1e-8;

const LEVELS: [usize; 6] = [8, 16, 32, 64, 128, 256];

/// `L_bar_n(theta, theta0)` for `theta` in local coordinates at sample size `n`.
///
/// Linear model: `1/2 s^2 ||theta - theta0||^2` exactly. Logistic model: the
/// expectation over `W` only involves the two indices `u = W'beta` and
/// `u0 = W'beta0`, so it is a bivariate Gaussian integral evaluated by a
/// tensor Gauss-Hermite rule refined until successive rules agree.
pub fn oos_regret(dgp: &DgpSpec, n: usize, theta: &DVector<f64>) -> Result<f64, LabError> {
    if theta.len() != dgp.k() {
        return Err(LabError::Config(format!("theta has length {} but k = {}", theta.len(), dgp.k())));
    }
    let theta0 = dgp.local_theta0(n);
    let s2 = dgp.feature_scale * dgp.feature_scale;
    match dgp.model {
        LossModel::LinearSquaredError => Ok(0.5 * s2 * (theta - theta0).norm_squared()),
        LossModel::LogisticNll => {
            let sqrt_n = (n as f64).sqrt();
            let b = theta / sqrt_n;
            let b0 = theta0 / sqrt_n;
            let cov = DMatrix::from_row_slice(2, 2, &[b0.dot(&b0), b0.dot(&b), b.dot(&b0), b.dot(&b)]) * s2;
            let root = psd_sqrt(&cov);
            let f = |z1: f64, z2: f64| {
                let u0 = root[(0, 0)] * z1 + root[(0, 1)] * z2;
                let u = root[(1, 0)] * z1 + root[(1, 1)] * z2;
                // Bregman divergence of softplus: non-negative, no y needed
                softplus(u) - softplus(u0) - sigmoid(u0) * (u - u0)
            };
            let mut prev: Option<f64> = None;
            for (lvl, &m) in LEVELS.iter().enumerate() {
                let (x, w) = &rules()[lvl];
                let mut acc = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        acc += w[i] * w[j] * f(x[i], x[j]);
                    }
                }
                let val = n as f64 * acc;
                if let Some(p) = prev {
                    if (val - p).abs() < QUADRATURE_TOL {
                        return Ok(val);
                    }
                }
                prev = Some(val);
            }
            Err(LabError::Numeric(surecvlab_core::Error::NoConvergence {
                what: "Gauss-Hermite regret quadrature",
                iterations: LEVELS.len(),
                residual: f64::NAN,
            }))
        }
    }
}

fn rules() -> &'static Vec<(Vec<f64>, Vec<f64>)> {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    RULES.get_or_init(|| LEVELS.iter().map(|&m| gauss_hermite(m)).collect())
}

/// Nodes and weights for `E[f(Z)]`, `Z ~ N(0, 1)`, by the Golub-Welsch
/// eigenvalue method on the probabilists' Hermite recurrence.
pub fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(m, m);
    for i in 1..m {
        let b = (i as f64).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let e = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> =
        (0..m).map(|i| (e.eigenvalues[i], e.eigenvectors[(0, i)] * e.eigenvectors[(0, i)])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
