//! Rank-p eigendecomposition approximation of the normal matrix J^T J.
//!
//! Two sketching templates: the prolonged (Nystrom) sketch multiplies through
//! J twice after building the basis, the pinched sketch projects both sides.
//! Both spend exactly `v` views of J in total.

use crate::dense::{svd_dense, tevd_psd, tsvd, Mat};
use crate::error::{Error, Result};
use crate::norms::{operator_spectral_norm, NormalResidualOp};
use crate::operator::{AdjointOp, LinearOperator};
use crate::rng::RngHandle;
use crate::subspace::qr_qc;
use crate::types::EvdPair;

fn validate(j: &dyn LinearOperator, p: usize, l: usize, v: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::arg("target rank p must be >= 1"));
    }
    if p + l > j.n_rows().min(j.n_cols()) {
        return Err(Error::arg(format!(
            "p + l = {} exceeds min dimension {}",
            p + l,
            j.n_rows().min(j.n_cols())
        )));
    }
    if v < 2 {
        return Err(Error::arg("normal-matrix sketches need v >= 2"));
    }
    Ok(())
}

/// Nystrom (prolonged) sketch for an approximate rank-p EVD of J^T J using
/// exactly v views of J.
pub fn nystrom_normal(
    j: &dyn LinearOperator,
    p: usize,
    l: usize,
    v: usize,
    rng: &mut RngHandle,
) -> Result<EvdPair> {
    validate(j, p, l, v)?;
    let q_r = if v == 2 {
        let omega = rng.gaussian_matrix(j.n_cols(), p + l)?;
        crate::dense::orthonormalize(&omega)?.q
    } else if v % 2 == 0 {
        qr_qc(j, p, l, v - 2, rng)?
    } else {
        let jt = AdjointOp::new(j);
        qr_qc(&jt, p, l, v - 2, rng)?
    };

    let mut y_r = j.apply_adjoint(&j.apply(&q_r));
    // Shift by nu to keep the small Gram matrix positive definite.
    let nu = 2.2e-16 * svd_dense(&y_r)?.lambda.first().copied().unwrap_or(0.0);
    y_r += &q_r * nu;
    let b = q_r.transpose() * &y_r;
    let sym = (&b + b.transpose()) * 0.5;
    let c_l = crate::dense::chol_lower_shifted(&sym, nu)?;
    let f = crate::dense::solve_lower_triangular(&c_l, &y_r.transpose());
    let small = tsvd(&f, p)?;
    let lambda_sq: Vec<f64> = small
        .lambda
        .iter()
        .map(|s| (s * s - nu).max(0.0))
        .collect();
    Ok(EvdPair {
        v: small.v,
        lambda_sq,
    })
}

/// Pinched sketch for an approximate rank-p EVD of J^T J using exactly v
/// views of J.
pub fn pinched_normal(
    j: &dyn LinearOperator,
    p: usize,
    l: usize,
    v: usize,
    rng: &mut RngHandle,
) -> Result<EvdPair> {
    validate(j, p, l, v)?;
    let q_r = if v % 2 == 0 {
        let jt = AdjointOp::new(j);
        qr_qc(&jt, p, l, v - 1, rng)?
    } else {
        qr_qc(j, p, l, v - 1, rng)?
    };
    let b_c = j.apply(&q_r);
    let (lambda_sq, v_hat) = tevd_psd(&(b_c.transpose() * &b_c), p)?;
    Ok(EvdPair {
        v: &q_r * v_hat,
        lambda_sq,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct RelError {
    pub value: f64,
    /// True when the optimal residual was zero and the absolute error is
    /// reported instead.
    pub absolute_fallback: bool,
}

/// Spectral norm of J^T J - V diag(lambda_sq) V^T without materializing it.
pub fn normal_residual_spectral_norm(
    j: &dyn LinearOperator,
    approx: &EvdPair,
    seed: u64,
) -> f64 {
    let res = NormalResidualOp { j, approx };
    operator_spectral_norm(&res, seed)
}

/// Relative spectral error of a normal-matrix approximation against the
/// optimal rank-p truncation, for a dense J at desk scale.
pub fn normal_matrix_error(j: &Mat, approx: &EvdPair, p: usize) -> Result<RelError> {
    let sv = svd_dense(j)?.lambda;
    let opt = sv.get(p).map(|s| s * s).unwrap_or(0.0);
    let num = normal_residual_spectral_norm(j, approx, 0x6e72);
    if opt <= 0.0 {
        return Ok(RelError {
            value: num,
            absolute_fallback: true,
        });
    }
    Ok(RelError {
        value: num / opt - 1.0,
        absolute_fallback: false,
    })
}
