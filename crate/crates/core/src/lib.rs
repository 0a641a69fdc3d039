//! Shrinkage operators, Stein's unbiased risk estimate, and leave-one-out
//! cross-validation for penalized empirical risk minimization.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs; Monte Carlo drivers, file formats and the CLI
//! live in the `surecvlab` crate.
//!
//! Parameters are expressed in local coordinates `theta = sqrt(n) * beta`
//! throughout. Functions that take or return the raw scale say so in their
//! name (`*_beta`).
//!
//! Module map:
//!
//! * [`penalty`] and [`prox`]: Ridge / Lasso penalties with a general matrix
//!   `A`, the proximal displacement `g^lambda(theta)` and its Jacobian.
//! * [`sure`], [`segments`], [`tuning`], [`structure`]: SURE evaluation, the
//!   Lasso breakpoint path, SURE minimisation with the smallest-argmin rule,
//!   and the supermodularity / sawtooth / well-separation diagnostics.
//! * [`erm`]: loss models, full-sample and penalized fits, exact and
//!   Newton-step leave-one-out estimators, influence-function quantities.
//! * [`cv`]: the n-fold CV criterion, CV tuning and CV-vs-SURE gaps.
#![no_std]
#![warn(missing_docs)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cv;
pub mod erm;
mod error;
pub mod linalg;
pub mod penalty;
pub mod prox;
pub mod search;
pub mod segments;
pub mod structure;
pub mod sure;
pub mod tuning;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};

/// Two SURE or CV values closer than this are treated as tied; the smaller
/// `lambda` wins.
pub const TIE_TOLERANCE: f64 = 1e-10;
