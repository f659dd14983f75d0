//! Dense factorization kernels: thin QR, SVD, Cholesky, least squares and
//! orthonormalization.
//!
//! These wrap nalgebra's decompositions behind a fixed set of contracts: thin
//! QR forces a nonnegative R diagonal so results are reproducible, SVD output
//! is always sorted nonincreasing, and every rank decision uses the same
//! relative threshold [`RANK_REL_TOL`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::SvdTriple;

/// Column-major dense matrix of f64, the storage type used everywhere.
pub type Mat = DMatrix<f64>;
pub type Vect = DVector<f64>;

/// Relative rank-deficiency threshold, measured against the largest
/// diagonal entry (QR) or leading singular value (SVD).
pub const RANK_REL_TOL: f64 = 1e-12;

/// Iteration cap handed to the SVD kernel before reporting non-convergence.
const SVD_MAX_ITER: usize = 10_000;

pub(crate) fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what: what.into() })
    }
}

/// Thin QR factorization of an m-by-k matrix with m >= k.
///
/// Returns (Q, R) with Q m-by-k orthonormal, R k-by-k upper triangular and
/// diag(R) >= 0.
pub fn qr_thin(m: &Mat) -> Result<(Mat, Mat)> {
    if m.nrows() < m.ncols() {
        return Err(Error::dim(format!(
            "qr_thin needs rows >= cols, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m, "qr_thin input")?;
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    // Sign convention: nonnegative diagonal of R.
    for j in 0..r.nrows() {
        if r[(j, j)] < 0.0 {
            for c in j..r.ncols() {
                r[(j, c)] = -r[(j, c)];
            }
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok((q, r))
}

/// Full SVD of a dense matrix, singular values sorted nonincreasing.
pub fn svd_dense(m: &Mat) -> Result<SvdTriple> {
    ensure_finite(m, "svd_dense input")?;
    let svd = nalgebra::linalg::SVD::try_new(m.clone(), true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::SvdNonConvergence {
            iterations: SVD_MAX_ITER,
        })?;
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").transpose();
    let lambda: Vec<f64> = svd.singular_values.iter().copied().collect();
    Ok(SvdTriple { u, lambda, v })
}

/// Rank-p truncated SVD.
pub fn tsvd(m: &Mat, p: usize) -> Result<SvdTriple> {
    let k = m.nrows().min(m.ncols());
    if p == 0 || p > k {
        return Err(Error::arg(format!(
            "tsvd rank {p} out of range for {}x{} input",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(svd_dense(m)?.truncate(p))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// `shift` is only used to annotate the error when a pivot fails (callers
/// such as the Nystrom sketch apply a shift first); pass 0.0 otherwise.
pub fn chol_lower_shifted(s: &Mat, shift: f64) -> Result<Mat> {
    let k = s.nrows();
    if s.ncols() != k {
        return Err(Error::dim(format!("cholesky needs square input, got {}x{}", k, s.ncols())));
    }
    ensure_finite(s, "cholesky input")?;
    let scale = s.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut defect = 0.0f64;
    for i in 0..k {
        for j in 0..i {
            defect = defect.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if defect > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { defect });
    }
    let mut l = Mat::zeros(k, k);
    for j in 0..k {
        let mut d = s[(j, j)];
        for t in 0..j {
            d -= l[(j, t)] * l[(j, t)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                index: j,
                value: d,
                shift,
            });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in j + 1..k {
            let mut v = s[(i, j)];
            for t in 0..j {
                v -= l[(i, t)] * l[(j, t)];
            }
            l[(i, j)] = v / dj;
        }
    }
    Ok(l)
}

pub fn chol_lower(s: &Mat) -> Result<Mat> {
    chol_lower_shifted(s, 0.0)
}

/// Solves L X = B for lower-triangular L.
pub fn solve_lower_triangular(l: &Mat, b: &Mat) -> Mat {
    let n = l.nrows();
    assert_eq!(b.nrows(), n, "solve_lower_triangular shape");
    let mut x = b.clone();
    for c in 0..x.ncols() {
        for i in 0..n {
            let mut v = x[(i, c)];
            for t in 0..i {
                v -= l[(i, t)] * x[(t, c)];
            }
            x[(i, c)] = v / l[(i, i)];
        }
    }
    x
}

/// Solves R X = B for upper-triangular R.
pub fn solve_upper_triangular(r: &Mat, b: &Mat) -> Mat {
    let n = r.nrows();
    assert_eq!(b.nrows(), n, "solve_upper_triangular shape");
    let mut x = b.clone();
    for c in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut v = x[(i, c)];
            for t in i + 1..n {
                v -= r[(i, t)] * x[(t, c)];
            }
            x[(i, c)] = v / r[(i, i)];
        }
    }
    x
}

/// M^+ B with the pseudo-inverse formed by SVD and a relative cutoff.
pub fn pinv_times(m: &Mat, b: &Mat, rel_cutoff: f64) -> Result<Mat> {
    let svd = svd_dense(m)?;
    let sigma1 = svd.lambda.first().copied().unwrap_or(0.0);
    let cut = rel_cutoff * sigma1;
    let utb = svd.u.transpose() * b;
    let mut scaled = utb;
    for i in 0..svd.lambda.len() {
        let s = svd.lambda[i];
        let f = if s > cut && s > 0.0 { 1.0 / s } else { 0.0 };
        for c in 0..scaled.ncols() {
            scaled[(i, c)] *= f;
        }
    }
    Ok(&svd.v * scaled)
}

/// B M^+ with the pseudo-inverse formed by SVD and a relative cutoff.
pub fn times_pinv(b: &Mat, m: &Mat, rel_cutoff: f64) -> Result<Mat> {
    // B M^+ = (M^{+*} B^*)^* = ((M^*)^+ B^*)^*
    let mt = m.transpose();
    let bt = b.transpose();
    Ok(pinv_times(&mt, &bt, rel_cutoff)?.transpose())
}

/// Least-squares solution of C X = RHS via QR.
pub struct Lstsq {
    pub x: Mat,
    /// True when R was rank deficient and the SVD pseudo-inverse was used.
    pub degraded: bool,
}

pub fn lstsq_via_qr(c: &Mat, rhs: &Mat) -> Result<Lstsq> {
    if c.nrows() < c.ncols() {
        return Err(Error::dim(format!(
            "lstsq_via_qr needs rows >= cols, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if rhs.nrows() != c.nrows() {
        return Err(Error::dim("lstsq_via_qr: rhs row count"));
    }
    let (q, r) = qr_thin(c)?;
    let dmax = (0..r.nrows()).fold(0.0f64, |a, i| a.max(r[(i, i)].abs()));
    let deficient = r.nrows() == 0
        || dmax == 0.0
        || (0..r.nrows()).any(|i| r[(i, i)].abs() < RANK_REL_TOL * dmax);
    if deficient {
        let x = pinv_times(c, rhs, RANK_REL_TOL)?;
        return Ok(Lstsq { x, degraded: true });
    }
    let x = solve_upper_triangular(&r, &(q.transpose() * rhs));
    Ok(Lstsq { x, degraded: false })
}

/// Orthonormal basis for the range of M.
pub struct Orth {
    pub q: Mat,
    /// Detected numerical rank; equals the column count of `q`.
    pub rank: usize,
    /// True when the input was numerically rank deficient.
    pub deficient: bool,
}

pub fn orthonormalize(m: &Mat) -> Result<Orth> {
    if m.nrows() < m.ncols() {
        return Err(Error::dim(format!(
            "orthonormalize needs rows >= cols, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let (q, r) = qr_thin(m)?;
    let dmax = (0..r.nrows()).fold(0.0f64, |a, i| a.max(r[(i, i)].abs()));
    let full_rank =
        dmax > 0.0 && (0..r.nrows()).all(|i| r[(i, i)].abs() >= RANK_REL_TOL * dmax);
    if full_rank || m.ncols() == 0 {
        let rank = q.ncols();
        return Ok(Orth {
            q,
            rank,
            deficient: false,
        });
    }
    // Rank-deficient path: take the numerical range from the SVD.
    let svd = svd_dense(m)?;
    let sigma1 = svd.lambda.first().copied().unwrap_or(0.0);
    let rank = svd
        .lambda
        .iter()
        .take_while(|&&s| s > RANK_REL_TOL * sigma1 && s > 0.0)
        .count();
    let q = svd.u.columns(0, rank).into_owned();
    Ok(Orth {
        q,
        rank,
        deficient: true,
    })
}

/// Truncated eigendecomposition of a symmetric positive-semidefinite matrix.
///
/// Returns the `p` largest eigenvalues (clamped at zero, sorted nonincreasing)
/// and their eigenvectors as columns.
pub fn tevd_psd(s: &Mat, p: usize) -> Result<(Vec<f64>, Mat)> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::dim("tevd_psd needs square input"));
    }
    if p == 0 || p > n {
        return Err(Error::arg(format!("tevd_psd rank {p} out of range for n={n}")));
    }
    ensure_finite(s, "tevd_psd input")?;
    let eig = nalgebra::linalg::SymmetricEigen::try_new(s.clone(), f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::SvdNonConvergence {
            iterations: SVD_MAX_ITER,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut vals = Vec::with_capacity(p);
    let mut vecs = Mat::zeros(n, p);
    for (k, &idx) in order.iter().take(p).enumerate() {
        vals.push(eig.eigenvalues[idx].max(0.0));
        vecs.set_column(k, &eig.eigenvectors.column(idx));
    }
    Ok((vals, vecs))
}

/// Frobenius norm of a matrix.
pub fn frob(m: &Mat) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Spectral norm (largest singular value) via dense SVD.
pub fn spectral_norm_dense(m: &Mat) -> Result<f64> {
    Ok(svd_dense(m)?.lambda.first().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;
    use approx::assert_relative_eq;

    #[test]
    fn qr_identity() {
        let m = Mat::identity(3, 3);
        let (q, r) = qr_thin(&m).unwrap();
        assert_relative_eq!(q, Mat::identity(3, 3), epsilon = 1e-14);
        assert_relative_eq!(r, Mat::identity(3, 3), epsilon = 1e-14);
    }

    #[test]
    fn qr_three_four_five() {
        let m = Mat::from_column_slice(2, 1, &[3.0, 4.0]);
        let (q, r) = qr_thin(&m).unwrap();
        assert_relative_eq!(q[(0, 0)], 0.6, epsilon = 1e-14);
        assert_relative_eq!(q[(1, 0)], 0.8, epsilon = 1e-14);
        assert_relative_eq!(r[(0, 0)], 5.0, epsilon = 1e-14);
    }

    #[test]
    fn qr_reconstructs_random() {
        let mut rng = RngHandle::new(7);
        let m = rng.gaussian_matrix(20, 5).unwrap();
        let (q, r) = qr_thin(&m).unwrap();
        let rel = frob(&(&q * &r - &m)) / frob(&m);
        assert!(rel < 1e-12, "reconstruction {rel}");
        let qtq = q.transpose() * &q;
        assert_relative_eq!(qtq, Mat::identity(5, 5), epsilon = 1e-12);
        for j in 0..5 {
            assert!(r[(j, j)] >= 0.0);
            for i in j + 1..5 {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn qr_rejects_wide() {
        let m = Mat::zeros(2, 4);
        assert!(matches!(qr_thin(&m), Err(Error::Dimension(_))));
    }

    #[test]
    fn svd_diagonal() {
        let m = Mat::from_partial_diagonal(2, 2, &[3.0, 1.0]);
        let t = svd_dense(&m).unwrap();
        assert_relative_eq!(t.lambda[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(t.lambda[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn svd_permuted_diagonal() {
        let m = Mat::from_column_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        let t = svd_dense(&m).unwrap();
        assert_relative_eq!(t.lambda[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(t.lambda[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn svd_matches_eigensolve_of_normal_matrix() {
        let mut rng = RngHandle::new(11);
        let m = rng.gaussian_matrix(8, 6).unwrap();
        let t = svd_dense(&m).unwrap();
        // Independent oracle: eigenvalues of M^T M.
        let mtm = m.transpose() * &m;
        let eig = nalgebra::linalg::SymmetricEigen::new(mtm);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for i in 0..6 {
            assert_relative_eq!(t.lambda[i], ev[i], epsilon = 1e-10, max_relative = 1e-10);
        }
        // Reconstruction.
        let rel = frob(&(t.reconstruct() - &m)) / frob(&m);
        assert!(rel < 1e-10);
    }

    #[test]
    fn svd_transpose_same_singvals() {
        let mut rng = RngHandle::new(3);
        let m = rng.gaussian_matrix(9, 5).unwrap();
        let a = svd_dense(&m).unwrap();
        let b = svd_dense(&m.transpose()).unwrap();
        for i in 0..5 {
            assert_relative_eq!(a.lambda[i], b.lambda[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn chol_identity_and_2x2() {
        let l = chol_lower(&Mat::identity(4, 4)).unwrap();
        assert_relative_eq!(l, Mat::identity(4, 4), epsilon = 1e-14);
        let s = Mat::from_column_slice(2, 2, &[4.0, 2.0, 2.0, 5.0]);
        let l = chol_lower(&s).unwrap();
        let expect = Mat::from_column_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert_relative_eq!(l, expect, epsilon = 1e-14);
    }

    #[test]
    fn chol_reconstructs() {
        let mut rng = RngHandle::new(5);
        let g = rng.gaussian_matrix(6, 6).unwrap();
        let s = &g * g.transpose() + Mat::identity(6, 6);
        let l = chol_lower(&s).unwrap();
        let rel = frob(&(&l * l.transpose() - &s)) / frob(&s);
        assert!(rel < 1e-12, "rel {rel}");
    }

    #[test]
    fn chol_rejects_indefinite() {
        let s = Mat::from_column_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match chol_lower(&s) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected definiteness error, got {other:?}"),
        }
    }

    #[test]
    fn lstsq_identity_and_mean() {
        let rhs = Mat::from_column_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let r = lstsq_via_qr(&Mat::identity(2, 2), &rhs).unwrap();
        assert_relative_eq!(r.x, rhs, epsilon = 1e-14);
        assert!(!r.degraded);

        let c = Mat::from_column_slice(2, 1, &[1.0, 1.0]);
        let rhs = Mat::from_column_slice(2, 1, &[1.0, 3.0]);
        let r = lstsq_via_qr(&c, &rhs).unwrap();
        assert_relative_eq!(r.x[(0, 0)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn lstsq_matches_normal_equations() {
        let mut rng = RngHandle::new(9);
        let c = rng.gaussian_matrix(10, 4).unwrap();
        let rhs = rng.gaussian_matrix(10, 2).unwrap();
        let r = lstsq_via_qr(&c, &rhs).unwrap();
        // Oracle: (C^T C)^{-1} C^T RHS
        let ctc = c.transpose() * &c;
        let x_oracle = ctc.lu().solve(&(c.transpose() * &rhs)).unwrap();
        assert_relative_eq!(r.x, x_oracle, epsilon = 1e-8);
    }

    #[test]
    fn lstsq_degraded_on_rank_deficiency() {
        let mut c = Mat::zeros(4, 2);
        c[(0, 0)] = 1.0;
        c[(1, 0)] = 1.0;
        c[(0, 1)] = 1.0;
        c[(1, 1)] = 1.0;
        let rhs = Mat::from_column_slice(4, 1, &[1.0, 1.0, 0.0, 0.0]);
        let r = lstsq_via_qr(&c, &rhs).unwrap();
        assert!(r.degraded);
        // Minimum-norm solution splits the weight.
        assert_relative_eq!(r.x[(0, 0)], 0.5, epsilon = 1e-10);
        assert_relative_eq!(r.x[(1, 0)], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn orth_spans_input() {
        let mut rng = RngHandle::new(13);
        let m = rng.gaussian_matrix(30, 6).unwrap();
        let o = orthonormalize(&m).unwrap();
        assert!(!o.deficient);
        assert_eq!(o.rank, 6);
        // Projector oracle: Q Q^T == M (M^T M)^{-1} M^T
        let proj = &o.q * o.q.transpose();
        let mtm = m.transpose() * &m;
        let inv = mtm.try_inverse().unwrap();
        let oracle = &m * inv * m.transpose();
        assert_relative_eq!(proj, oracle, epsilon = 1e-10);
        let back = frob(&(&proj * &m - &m));
        assert!(back < 1e-12 * frob(&m));
    }

    #[test]
    fn orth_flags_duplicate_column() {
        let mut rng = RngHandle::new(17);
        let m = rng.gaussian_matrix(10, 2).unwrap();
        let mut dup = Mat::zeros(10, 3);
        dup.set_column(0, &m.column(0));
        dup.set_column(1, &m.column(1));
        dup.set_column(2, &m.column(0));
        let o = orthonormalize(&dup).unwrap();
        assert!(o.deficient);
        assert_eq!(o.rank, 2);
        assert_eq!(o.q.ncols(), 2);
    }

    #[test]
    fn tevd_sorted_and_clamped() {
        let mut rng = RngHandle::new(23);
        let g = rng.gaussian_matrix(7, 3).unwrap();
        let s = &g * g.transpose(); // psd, rank 3
        let (vals, vecs) = tevd_psd(&s, 5).unwrap();
        assert_eq!(vals.len(), 5);
        for w in vals.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(vals.iter().all(|&v| v >= 0.0));
        let vtv = vecs.transpose() * &vecs;
        assert_relative_eq!(vtv, Mat::identity(5, 5), epsilon = 1e-10);
    }

    #[test]
    fn pinv_and_triangular_solves() {
        let mut rng = RngHandle::new(29);
        let m = rng.gaussian_matrix(6, 4).unwrap();
        let b = rng.gaussian_matrix(6, 2).unwrap();
        let x = pinv_times(&m, &b, RANK_REL_TOL).unwrap();
        let oracle = lstsq_via_qr(&m, &b).unwrap().x;
        assert_relative_eq!(x, oracle, epsilon = 1e-9);

        let (q, r) = qr_thin(&m).unwrap();
        let y = solve_upper_triangular(&r, &(q.transpose() * &b));
        assert_relative_eq!(y, oracle, epsilon = 1e-9);

        let l = r.transpose();
        let z = solve_lower_triangular(&l, &(r.transpose() * &y));
        assert_relative_eq!(z, y, epsilon = 1e-8);
    }
}
