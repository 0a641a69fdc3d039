//! Ridge and Lasso penalties parameterised by a `k x k` matrix `A`.
//!
//! * Ridge: `pi(theta) = 1/2 theta' A^{-1} theta`, `A` symmetric positive definite.
//! * Lasso: `pi(theta) = ||A^{-1} theta||_1`, `A` invertible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::linalg::{check_finite_mat, check_len, condition_number, is_symmetric, symmetrize};
use crate::{Error, Result};

/// Minimum eigenvalue accepted for a Ridge `A`.
pub const RIDGE_MIN_EIGENVALUE: f64 = 1e-10;
/// Largest condition number accepted for a Lasso `A`.
pub const LASSO_MAX_CONDITION: f64 = 1e12;

/// Penalty family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    /// Quadratic penalty.
    Ridge,
    /// L1 penalty on `A^{-1} theta`.
    Lasso,
}

/// A validated penalty. Immutable after construction; the factorisations
/// needed by the proximal map are computed once here.
#[derive(Debug, Clone)]
pub struct PenaltySpec {
    kind: PenaltyKind,
    a: DMatrix<f64>,
    /// Ridge: eigenvectors / eigenvalues of `A`.
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    /// Lasso: `A^{-1}` and the Gram matrix `A'A`.
    a_inv: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl PenaltySpec {
    /// Ridge penalty with symmetric positive definite `A`.
    pub fn ridge(a: DMatrix<f64>) -> Result<Self> {
        Self::validate_shape(&a)?;
        if !is_symmetric(&a) {
            return Err(Error::NotSymmetric("ridge A"));
        }
        let a = symmetrize(&a);
        let eig = SymmetricEigen::new(a.clone());
        let min = eig.eigenvalues.min();
        if min <= RIDGE_MIN_EIGENVALUE {
            return Err(Error::NotPositiveDefinite { what: "ridge A", min_eigenvalue: min });
        }
        let inv = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|d| 1.0 / d))
            * eig.eigenvectors.transpose();
        Ok(Self {
            kind: PenaltyKind::Ridge,
            gram: a.transpose() * &a,
            a,
            eigvecs: eig.eigenvectors,
            eigvals: eig.eigenvalues,
            a_inv: symmetrize(&inv),
        })
    }

    /// Lasso penalty with invertible `A` (condition number at most `1e12`).
    pub fn lasso(a: DMatrix<f64>) -> Result<Self> {
        Self::validate_shape(&a)?;
        let condition = condition_number(&a);
        if !(condition <= LASSO_MAX_CONDITION) {
            return Err(Error::IllConditioned { condition });
        }
        let a_inv = a.clone().try_inverse().ok_or(Error::IllConditioned { condition })?;
        let k = a.nrows();
        Ok(Self {
            kind: PenaltyKind::Lasso,
            gram: a.transpose() * &a,
            a,
            eigvecs: DMatrix::zeros(k, k),
            eigvals: DVector::zeros(k),
            a_inv,
        })
    }

    /// Ridge with `A = I_k`.
    pub fn ridge_identity(k: usize) -> Result<Self> {
        Self::ridge(DMatrix::identity(k, k))
    }

    /// Lasso with `A = I_k`.
    pub fn lasso_identity(k: usize) -> Result<Self> {
        Self::lasso(DMatrix::identity(k, k))
    }

    fn validate_shape(a: &DMatrix<f64>) -> Result<()> {
        if a.nrows() == 0 {
            return Err(Error::InvalidArgument("penalty dimension must be positive".into()));
        }
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                what: "penalty A columns",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        check_finite_mat(a, "penalty A")
    }

    /// Penalty family.
    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    /// Dimension `k`.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// The matrix `A`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// `A^{-1}`.
    pub fn a_inverse(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    /// `A'A`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub(crate) fn ridge_eigen(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.eigvecs, &self.eigvals)
    }

    /// `pi(theta)`.
    pub fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        check_len(theta, self.dim(), "theta")?;
        let h = &self.a_inv * theta;
        Ok(match self.kind {
            PenaltyKind::Ridge => 0.5 * theta.dot(&h),
            PenaltyKind::Lasso => h.iter().map(|x| x.abs()).sum(),
        })
    }

    /// Ridge only: the linear shrinkage matrix
    /// `C_lambda = -(A/lambda + I)^{-1} = -Q diag(lambda/(d+lambda)) Q'`.
    pub fn ridge_shrinkage_matrix(&self, lambda: f64) -> Result<DMatrix<f64>> {
        if self.kind != PenaltyKind::Ridge {
            return Err(Error::WrongPenalty("shrinkage matrix is defined for Ridge only"));
        }
        let k = self.dim();
        if lambda == 0.0 {
            return Ok(DMatrix::zeros(k, k));
        }
        let w = self.eigvals.map(|d| lambda / (d + lambda));
        let c = &self.eigvecs * DMatrix::from_diagonal(&w) * self.eigvecs.transpose();
        Ok(-symmetrize(&c))
    }
}
