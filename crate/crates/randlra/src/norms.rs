//! Norm estimation for implicit operators.
//!
//! Residuals like A - U diag(lambda) V^T never need to be materialized: the
//! Golub-Kahan Lanczos process below estimates their spectral norm through
//! block products alone. Dense paths use the exact SVD instead; the estimator
//! is validated against it in tests.

use crate::dense::{frob, Mat};
use crate::operator::LinearOperator;
use crate::rng::RngHandle;
use crate::types::{EvdPair, SvdTriple};

/// A - U diag(lambda) V^T as an implicit operator.
pub struct ResidualOp<'a> {
    pub a: &'a dyn LinearOperator,
    pub approx: &'a SvdTriple,
}

impl LinearOperator for ResidualOp<'_> {
    fn n_rows(&self) -> usize {
        self.a.n_rows()
    }

    fn n_cols(&self) -> usize {
        self.a.n_cols()
    }

    fn apply(&self, x: &Mat) -> Mat {
        self.a.apply(x) - self.approx.apply(x)
    }

    fn apply_adjoint(&self, y: &Mat) -> Mat {
        self.a.apply_adjoint(y) - self.approx.apply_adjoint(y)
    }
}

/// J^T J - V diag(lambda_sq) V^T as an implicit symmetric operator.
pub struct NormalResidualOp<'a> {
    pub j: &'a dyn LinearOperator,
    pub approx: &'a EvdPair,
}

impl LinearOperator for NormalResidualOp<'_> {
    fn n_rows(&self) -> usize {
        self.j.n_cols()
    }

    fn n_cols(&self) -> usize {
        self.j.n_cols()
    }

    fn apply(&self, x: &Mat) -> Mat {
        self.j.apply_adjoint(&self.j.apply(x)) - self.approx.apply(x)
    }

    fn apply_adjoint(&self, y: &Mat) -> Mat {
        self.apply(y)
    }
}

/// A (I - Q Q^T) as an implicit operator (co-range projection residual).
pub struct CorangeResidualOp<'a> {
    pub a: &'a dyn LinearOperator,
    pub q_r: &'a Mat,
}

impl LinearOperator for CorangeResidualOp<'_> {
    fn n_rows(&self) -> usize {
        self.a.n_rows()
    }

    fn n_cols(&self) -> usize {
        self.a.n_cols()
    }

    fn apply(&self, x: &Mat) -> Mat {
        let proj = x - self.q_r * (self.q_r.transpose() * x);
        self.a.apply(&proj)
    }

    fn apply_adjoint(&self, y: &Mat) -> Mat {
        let aty = self.a.apply_adjoint(y);
        &aty - self.q_r * (self.q_r.transpose() * &aty)
    }
}

/// Largest singular value of an implicit operator via Golub-Kahan Lanczos
/// bidiagonalization with full reorthogonalization.
///
/// Deterministic given `seed`. The estimate is monotone nondecreasing in the
/// iteration count and converges to the true norm; `tol` is the relative
/// stall tolerance used for early exit.
pub fn operator_spectral_norm_with(
    op: &dyn LinearOperator,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> f64 {
    let n_c = op.n_cols();
    let n_r = op.n_rows();
    let k_max = max_iter.min(n_c).min(n_r).max(1);

    let mut rng = RngHandle::new(seed);
    let mut v = rng.gaussian_matrix(n_c, 1).unwrap();
    let nv = frob(&v);
    if nv == 0.0 {
        return 0.0;
    }
    v /= nv;

    let mut vs: Vec<Mat> = vec![v.clone()];
    let mut us: Vec<Mat> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut best = 0.0f64;
    let mut stall = 0usize;

    for k in 0..k_max {
        // u_k = A v_k - beta_{k-1} u_{k-1}, reorthogonalized.
        let mut u = op.apply(&vs[k]);
        if let Some(prev) = us.last() {
            u -= prev * betas[k - 1];
        }
        for q in &us {
            let c = q.dot(&u);
            u -= q * c;
        }
        let alpha = frob(&u);
        if alpha <= 1e-300 {
            break;
        }
        u /= alpha;
        alphas.push(alpha);
        us.push(u);

        // v_{k+1} = A^T u_k - alpha_k v_k, reorthogonalized.
        let mut w = op.apply_adjoint(&us[k]);
        w -= &vs[k] * alpha;
        for q in &vs {
            let c = q.dot(&w);
            w -= q * c;
        }
        let beta = frob(&w);

        // Current estimate: largest singular value of the bidiagonal matrix.
        let m = alphas.len();
        let mut bid = Mat::zeros(m, m);
        for i in 0..m {
            bid[(i, i)] = alphas[i];
            if i + 1 < m {
                bid[(i, i + 1)] = betas[i];
            }
        }
        let est = crate::dense::spectral_norm_dense(&bid).unwrap_or(best);
        if est <= best * (1.0 + tol) && k > 2 {
            stall += 1;
            if stall >= 3 {
                return est.max(best);
            }
        } else {
            stall = 0;
        }
        best = best.max(est);

        if beta <= 1e-300 || vs.len() == n_c {
            break;
        }
        w /= beta;
        betas.push(beta);
        vs.push(w);
    }
    best
}

/// [`operator_spectral_norm_with`] with default tolerance and iteration cap.
pub fn operator_spectral_norm(op: &dyn LinearOperator, seed: u64) -> f64 {
    operator_spectral_norm_with(op, seed, 1e-10, 300)
}
