//! Monte Carlo studies: truncated risk of CV-tuned estimators at finite `n`,
//! the SURE-tuned normal-means limit, and distributional comparisons.
//!
//! Replications run in parallel on the current rayon pool. Each one draws
//! from its own seeded stream (see [`crate::seed`]) and results are reduced
//! in replication order, so output does not depend on the thread count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use surecvlab_core::cv::{tune_cv, CvMode};
use surecvlab_core::penalty::PenaltySpec;
use surecvlab_core::prox::prox;
use surecvlab_core::tuning::{minimize_sure, LambdaSet};
use surecvlab_core::{DMatrix, DVector};

use crate::dgp::{simulate_dataset, DgpSpec};
use crate::ks::ks_two_sample;
use crate::regret::oos_regret;
use crate::seed::replication_rng;
use crate::LabError;

/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// Default truncation level for `k <= 10`.
pub const DEFAULT_TRUNCATION: f64 = 50.0;

/// Monte Carlo settings.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    /// Sample sizes (each must exceed `k`).
    pub sample_sizes: Vec<usize>,
    /// Replications per sample size.
    pub replications: usize,
    /// Master seed.
    pub master_seed: u64,
    /// Truncation level `M`.
    pub truncation_m: f64,
}

impl McConfig {
    /// `replications` draws at `n` with the default truncation.
    pub fn new(sample_sizes: Vec<usize>, replications: usize, master_seed: u64) -> Self {
        Self { sample_sizes, replications, master_seed, truncation_m: DEFAULT_TRUNCATION }
    }

    /// Range checks against dimension `k`.
    pub fn validate(&self, k: usize) -> Result<(), LabError> {
        if self.replications == 0 {
            return Err(LabError::Config("replications must be at least 1".into()));
        }
        if !(self.truncation_m > 0.0) || self.truncation_m.is_nan() {
            return Err(LabError::Config("truncation_m must be positive".into()));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n <= k) {
            return Err(LabError::Config(format!("sample size n = {n} must exceed k = {k}")));
        }
        Ok(())
    }
}

/// Mean truncated loss with its Monte Carlo standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskEstimate {
    /// Mean of `min(loss, M)` over successful replications.
    pub mean: f64,
    /// Standard error of the mean (0 with one replication).
    pub stderr: f64,
    /// Successful replications.
    pub replications: usize,
    /// `M`.
    pub truncation_m: f64,
    /// Replications excluded after a numerical failure.
    pub failures: usize,
    /// Non-fatal notes.
    pub warnings: Vec<String>,
}

/// Untruncated per-replication losses, in replication order.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    /// Losses of the successful replications.
    pub losses: Vec<f64>,
    /// Number of failed replications.
    pub failures: usize,
}

impl LossSample {
    /// Truncate at `m` and summarise.
    pub fn risk(&self, m: f64) -> RiskEstimate {
        let r = self.losses.len();
        let mut warnings = Vec::new();
        let mean = self.losses.iter().map(|&l| l.min(m)).sum::<f64>() / r as f64;
        let stderr = if r > 1 {
            let ss: f64 = self.losses.iter().map(|&l| (l.min(m) - mean).powi(2)).sum();
            (ss / (r - 1) as f64 / r as f64).sqrt()
        } else {
            warnings.push("a single replication has no standard error; reporting 0".to_string());
            0.0
        };
        if self.failures > 0 {
            warnings.push(format!("{} replication(s) failed and were excluded", self.failures));
        }
        RiskEstimate { mean, stderr, replications: r, truncation_m: m, failures: self.failures, warnings }
    }
}

/// Losses `L_bar_n(theta_hat_n^*, theta0)` of the CV-tuned estimator.
pub fn cv_loss_sample(
    dgp: &DgpSpec,
    n: usize,
    penalty: &PenaltySpec,
    grid: &[f64],
    mode: CvMode,
    cfg: &McConfig,
) -> Result<LossSample, LabError> {
    dgp.validate()?;
    cfg.validate(dgp.k())?;
    if n <= dgp.k() {
        return Err(LabError::Config(format!("sample size n = {n} must exceed k = {}", dgp.k())));
    }
    if penalty.dim() != dgp.k() {
        return Err(LabError::Config("penalty and DGP dimensions differ".into()));
    }
    let seed = cfg.master_seed;
    let results: Vec<Result<f64, LabError>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            let data = simulate_dataset(dgp, n, seed, r)?;
            let tuned = tune_cv(dgp.model, &data, penalty, grid, mode)?;
            oos_regret(dgp, n, &tuned.theta_star)
        })
        .collect();
    collect_losses(results)
}

fn collect_losses(results: Vec<Result<f64, LabError>>) -> Result<LossSample, LabError> {
    let total = results.len();
    let mut losses = Vec::with_capacity(total);
    let mut failures = 0;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(l) => losses.push(l),
            // configuration problems are not replication failures
            Err(e @ LabError::Config(_)) => return Err(e),
            Err(e) => {
                failures += 1;
                first_err.get_or_insert(e);
            }
        }
    }
    if failures as f64 > MAX_FAILURE_RATE * total as f64 || losses.is_empty() {
        return Err(LabError::Study(format!(
            "{failures} of {total} replications failed (first: {})",
            first_err.map(|e| e.to_string()).unwrap_or_default()
        )));
    }
    Ok(LossSample { losses, failures })
}

/// `R_n(theta0)` truncated at `M`: simulate, tune by CV, score by the
/// out-of-sample regret.
pub fn risk_cv(
    dgp: &DgpSpec,
    n: usize,
    penalty: &PenaltySpec,
    grid: &[f64],
    mode: CvMode,
    cfg: &McConfig,
) -> Result<RiskEstimate, LabError> {
    Ok(cv_loss_sample(dgp, n, penalty, grid, mode, cfg)?.risk(cfg.truncation_m))
}

/// Symmetric square root of a PSD matrix, negative rounding clipped.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let d = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// One draw of the limit experiment: `theta_hat ~ N(theta0, Sigma)`, tune by
/// SURE, return `1/2 ||theta_hat^* - theta0||^2`.
fn limit_loss(
    theta0: &DVector<f64>,
    root: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    penalty: &PenaltySpec,
    set: &LambdaSet,
    master: u64,
    rep: u64,
) -> Result<f64, LabError> {
    let mut rng = replication_rng(master, 0, rep);
    let z = DVector::from_iterator(theta0.len(), (0..theta0.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let theta_hat = theta0 + root * z;
    let m = minimize_sure(penalty, &theta_hat, sigma, set)?;
    let p = prox(penalty, m.lambda_star, &theta_hat)?;
    Ok(0.5 * (p.fitted - theta0).norm_squared())
}

/// Losses of the SURE-tuned estimator in `theta_hat ~ N(theta0, Sigma)`.
pub fn limit_loss_sample(
    theta0: &DVector<f64>,
    sigma: &DMatrix<f64>,
    penalty: &PenaltySpec,
    set: &LambdaSet,
    cfg: &McConfig,
) -> Result<LossSample, LabError> {
    let k = theta0.len();
    if cfg.replications == 0 {
        return Err(LabError::Config("replications must be at least 1".into()));
    }
    if penalty.dim() != k {
        return Err(LabError::Config("penalty and theta0 dimensions differ".into()));
    }
    surecvlab_core::linalg::check_covariance(sigma, k)?;
    let root = psd_sqrt(sigma);
    let seed = cfg.master_seed;
    let results: Vec<Result<f64, LabError>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| limit_loss(theta0, &root, sigma, penalty, set, seed, r))
        .collect();
    collect_losses(results)
}

/// `R(theta0)` truncated at `M` for the SURE-tuned limit estimator.
pub fn risk_sure_limit(
    theta0: &DVector<f64>,
    sigma: &DMatrix<f64>,
    penalty: &PenaltySpec,
    set: &LambdaSet,
    cfg: &McConfig,
) -> Result<RiskEstimate, LabError> {
    Ok(limit_loss_sample(theta0, sigma, penalty, set, cfg)?.risk(cfg.truncation_m))
}

/// Kolmogorov-Smirnov distance between the finite-`n` tuned losses and the
/// limit losses (tuned by SURE over the same grid, `Sigma` from the DGP).
pub fn loss_distribution_compare(
    dgp: &DgpSpec,
    n: usize,
    penalty: &PenaltySpec,
    grid: &[f64],
    mode: CvMode,
    cfg: &McConfig,
) -> Result<f64, LabError> {
    let finite = cv_loss_sample(dgp, n, penalty, grid, mode, cfg)?;
    let sigma = dgp.limit_sigma()?;
    let set = LambdaSet::FiniteGrid(grid.to_vec());
    let limit = limit_loss_sample(&dgp.theta0, &sigma, penalty, &set, cfg)?;
    Ok(ks_two_sample(&finite.losses, &limit.losses))
}
