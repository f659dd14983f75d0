//! Result types for approximate factorizations.

use crate::dense::Mat;

/// Approximate rank-p singular value decomposition U diag(lambda) V^T.
///
/// U is n_r-by-p and V is n_c-by-p with orthonormal columns; `lambda` is
/// sorted nonincreasing and nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdTriple {
    pub u: Mat,
    pub lambda: Vec<f64>,
    pub v: Mat,
}

impl SvdTriple {
    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    /// Keep the leading p components.
    pub fn truncate(&self, p: usize) -> SvdTriple {
        assert!(p <= self.rank(), "truncate past available rank");
        SvdTriple {
            u: self.u.columns(0, p).into_owned(),
            lambda: self.lambda[..p].to_vec(),
            v: self.v.columns(0, p).into_owned(),
        }
    }

    /// Materialize U diag(lambda) V^T.
    pub fn reconstruct(&self) -> Mat {
        let mut ul = self.u.clone();
        for (j, &s) in self.lambda.iter().enumerate() {
            for i in 0..ul.nrows() {
                ul[(i, j)] *= s;
            }
        }
        ul * self.v.transpose()
    }

    /// Apply the approximation to a block: U diag(lambda) V^T X.
    pub fn apply(&self, x: &Mat) -> Mat {
        let mut t = self.v.transpose() * x;
        for (i, &s) in self.lambda.iter().enumerate() {
            for c in 0..t.ncols() {
                t[(i, c)] *= s;
            }
        }
        &self.u * t
    }

    /// Apply the adjoint of the approximation: V diag(lambda) U^T Y.
    pub fn apply_adjoint(&self, y: &Mat) -> Mat {
        let mut t = self.u.transpose() * y;
        for (i, &s) in self.lambda.iter().enumerate() {
            for c in 0..t.ncols() {
                t[(i, c)] *= s;
            }
        }
        &self.v * t
    }

    /// Max deviation of U^T U and V^T V from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let p = self.rank();
        let du = self.u.transpose() * &self.u - Mat::identity(p, p);
        let dv = self.v.transpose() * &self.v - Mat::identity(p, p);
        du.iter()
            .chain(dv.iter())
            .fold(0.0f64, |a, x| a.max(x.abs()))
    }
}

/// Approximate rank-p eigendecomposition V diag(lambda_sq) V^T of a normal
/// matrix J^T J. Eigenvalues are squared singular values of J.
#[derive(Clone, Debug, PartialEq)]
pub struct EvdPair {
    pub v: Mat,
    pub lambda_sq: Vec<f64>,
}

impl EvdPair {
    pub fn rank(&self) -> usize {
        self.lambda_sq.len()
    }

    /// Materialize V diag(lambda_sq) V^T.
    pub fn reconstruct(&self) -> Mat {
        let mut vl = self.v.clone();
        for (j, &s) in self.lambda_sq.iter().enumerate() {
            for i in 0..vl.nrows() {
                vl[(i, j)] *= s;
            }
        }
        vl * self.v.transpose()
    }

    /// Apply V diag(lambda_sq) V^T to a block.
    pub fn apply(&self, x: &Mat) -> Mat {
        let mut t = self.v.transpose() * x;
        for (i, &s) in self.lambda_sq.iter().enumerate() {
            for c in 0..t.ncols() {
                t[(i, c)] *= s;
            }
        }
        &self.v * t
    }
}
