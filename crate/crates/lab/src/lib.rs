//! Simulation harness and command-line front-end for `surecvlab-core`.
//!
//! * [`dgp`]: local-to-zero data-generating processes.
//! * [`regret`]: out-of-sample regret `L_bar_n`.
//! * [`study`]: Monte Carlo risk of CV-tuned estimators and of the
//!   SURE-tuned normal-means limit, and distributional comparisons.
//! * [`js`]: James-Stein risk curves.
//! * [`cli`]: the `surecvlab` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod csvfmt;
pub mod dgp;
pub mod js;
pub mod ks;
pub mod reference;
pub mod regret;
pub mod seed;
pub mod study;

/// Errors raised by the lab. Each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Bad configuration or arguments.
    #[error("configuration error: {0}")]
    Config(String),
    /// Numerical failure inside the core library.
    #[error("numerical failure: {0}")]
    Numeric(#[from] surecvlab_core::Error),
    /// A study aborted (e.g. too many failed replications).
    #[error("study aborted: {0}")]
    Study(String),
    /// `--check` found a mismatch against a reference table.
    #[error("check failed: {0}")]
    Check(String),
    /// Reading or writing files.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// Process exit code: 2 configuration, 3 numerical, 4 check.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Io(_) => 2,
            LabError::Numeric(_) | LabError::Study(_) => 3,
            LabError::Check(_) => 4,
        }
    }
}
