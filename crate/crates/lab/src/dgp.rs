//! Data-generating processes in local-to-zero coordinates.

use rand::Rng;
use rand_distr::StandardNormal;
use surecvlab_core::erm::{sigmoid, Dataset, LossModel};
use surecvlab_core::{DMatrix, DVector};

use crate::seed::replication_rng;
use crate::LabError;

/// How the true coefficients depend on `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamScaling {
    /// `beta0 = theta0 / sqrt(n)`; `theta0` is held fixed across `n`.
    Local,
    /// `beta0 = theta0` for every `n`.
    Fixed,
}

/// A DGP: features `W ~ N(0, s^2 I)` and outcomes from `model` at `beta0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    /// Local parameter (or `beta0` itself under [`ParamScaling::Fixed`]).
    pub theta0: DVector<f64>,
    /// Linear model noise standard deviation.
    pub sigma_noise: f64,
    /// Outcome model.
    pub model: LossModel,
    /// Feature standard deviation `s`.
    pub feature_scale: f64,
    /// Dependence of `beta0` on `n`.
    pub scaling: ParamScaling,
}

impl DgpSpec {
    /// `y = W beta0 + sigma e`, unit-variance features.
    pub fn linear(theta0: DVector<f64>, sigma_noise: f64) -> Self {
        Self { theta0, sigma_noise, model: LossModel::LinearSquaredError, feature_scale: 1.0, scaling: ParamScaling::Local }
    }

    /// Logistic outcomes. Features have standard deviation 2 so that the
    /// Hessian at `beta = 0` is the identity.
    pub fn logistic(theta0: DVector<f64>) -> Self {
        Self { theta0, sigma_noise: 1.0, model: LossModel::LogisticNll, feature_scale: 2.0, scaling: ParamScaling::Local }
    }

    /// Logistic outcomes with `beta0` fixed across `n`.
    pub fn logistic_fixed(beta0: DVector<f64>) -> Self {
        Self { scaling: ParamScaling::Fixed, ..Self::logistic(beta0) }
    }

    /// Dimension.
    pub fn k(&self) -> usize {
        self.theta0.len()
    }

    /// `beta0` at sample size `n`.
    pub fn beta0(&self, n: usize) -> DVector<f64> {
        match self.scaling {
            ParamScaling::Local => &self.theta0 / (n as f64).sqrt(),
            ParamScaling::Fixed => self.theta0.clone(),
        }
    }

    /// `theta0 = sqrt(n) beta0` at sample size `n`.
    pub fn local_theta0(&self, n: usize) -> DVector<f64> {
        self.beta0(n) * (n as f64).sqrt()
    }

    /// Check entries and ranges.
    pub fn validate(&self) -> Result<(), LabError> {
        if self.theta0.is_empty() || self.theta0.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Config("theta0 must be a non-empty finite vector".into()));
        }
        if !(self.sigma_noise > 0.0 && self.sigma_noise.is_finite()) {
            return Err(LabError::Config("sigma_noise must be positive".into()));
        }
        if !(self.feature_scale > 0.0 && self.feature_scale.is_finite()) {
            return Err(LabError::Config("feature_scale must be positive".into()));
        }
        Ok(())
    }

    /// Covariance `Sigma = H^{-1} V H^{-1}` of the normal-means limit.
    pub fn limit_sigma(&self) -> Result<DMatrix<f64>, LabError> {
        if self.scaling == ParamScaling::Fixed {
            return Err(LabError::Config("a fixed-beta DGP has no local limit experiment".into()));
        }
        let k = self.k();
        let s2 = self.feature_scale * self.feature_scale;
        let v = match self.model {
            // H = s^2 I, V = sigma^2 s^2 I
            LossModel::LinearSquaredError => self.sigma_noise * self.sigma_noise / s2,
            // at beta = 0: H = V = s^2/4 I
            LossModel::LogisticNll => 4.0 / s2,
        };
        Ok(DMatrix::identity(k, k) * v)
    }
}

/// Draw `n` observations for replication `rep` under master seed `master`.
pub fn simulate_dataset(dgp: &DgpSpec, n: usize, master: u64, rep: u64) -> Result<Dataset, LabError> {
    dgp.validate()?;
    let k = dgp.k();
    if n <= k {
        return Err(LabError::Config(format!("sample size n = {n} must exceed k = {k}")));
    }
    let mut rng = replication_rng(master, n as u64, rep);
    let beta = dgp.beta0(n);
    let mut w = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        for j in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            w[(i, j)] = dgp.feature_scale * z;
        }
        let u = w.row(i).transpose().dot(&beta);
        y[i] = match dgp.model {
            LossModel::LinearSquaredError => {
                let e: f64 = rng.sample(StandardNormal);
                u + dgp.sigma_noise * e
            }
            LossModel::LogisticNll => {
                if rng.random::<f64>() < sigmoid(u) {
                    1.0
                } else {
                    0.0
                }
            }
        };
    }
    Ok(Dataset::new(w, y)?)
}
