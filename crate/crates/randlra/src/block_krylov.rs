//! Generalized randomized block Krylov TSVD.
//!
//! Instead of keeping only the newest iterate, all intermediate blocks are
//! concatenated into one enlarged basis before the final projection. The
//! last block before concatenation is deliberately left unnormalized, which
//! preserves its span weighting. Total views are exactly `v`; the operator
//! is multiplied with (v + floor(v/2) - 1)(p + l) vectors.
//!
//! The row-streamed variant fuses each A^T A product into a single pass over
//! the rows, reaching the same factorization (up to conditioning) in
//! ceil((v-1)/2) + 1 passes.

use crate::dense::{orthonormalize, qr_thin, solve_upper_triangular, times_pinv, tsvd, Mat, RANK_REL_TOL};
use crate::error::{Error, Result};
use crate::one_view::RowBlock;
use crate::operator::LinearOperator;
use crate::rng::RngHandle;
use crate::types::SvdTriple;

/// Block Krylov result plus basis diagnostics.
#[derive(Clone, Debug)]
pub struct KrylovOutcome {
    pub svd: SvdTriple,
    /// Numerical rank of the concatenated Krylov basis.
    pub basis_rank: usize,
    /// True when the concatenation was rank deficient and the basis width
    /// was reduced.
    pub basis_deficient: bool,
}

fn validate(a_rows: usize, a_cols: usize, p: usize, l: usize, v: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::arg("target rank p must be >= 1"));
    }
    if v < 2 {
        return Err(Error::arg("block Krylov needs v >= 2"));
    }
    if p + l > a_rows.min(a_cols) {
        return Err(Error::arg(format!(
            "p + l = {} exceeds min dimension {}",
            p + l,
            a_rows.min(a_cols)
        )));
    }
    let width = (v / 2) * (p + l);
    if v % 2 == 0 && width > a_rows {
        return Err(Error::arg(format!(
            "Krylov basis width {width} exceeds row count {a_rows}"
        )));
    }
    if v % 2 == 1 && ((v - 1) / 2) * (p + l) > a_cols {
        return Err(Error::arg(format!(
            "Krylov basis width {} exceeds column count {a_cols}",
            ((v - 1) / 2) * (p + l)
        )));
    }
    Ok(())
}

fn hcat(blocks: &[Mat]) -> Mat {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Randomized SVD by the generalized block Krylov method, any v >= 2.
///
/// Identical to the generalized subspace iteration for v < 4 (one block).
pub fn block_krylov_svd(
    a: &dyn LinearOperator,
    p: usize,
    l: usize,
    v: usize,
    rng: &mut RngHandle,
) -> Result<KrylovOutcome> {
    validate(a.n_rows(), a.n_cols(), p, l, v)?;
    let k = p + l;
    let mut q_r = rng.gaussian_matrix(a.n_cols(), k)?;
    let mut q_c = Mat::zeros(0, 0);
    let mut c_blocks: Vec<Mat> = Vec::new();
    let mut r_blocks: Vec<Mat> = Vec::new();
    for j in 1..=v - 1 {
        if j % 2 == 1 {
            let y = a.apply(&q_r);
            q_c = if j < v - 1 { qr_thin(&y)?.0 } else { y };
            c_blocks.push(q_c.clone());
        } else {
            let y = a.apply_adjoint(&q_c);
            q_r = if j < v - 1 { qr_thin(&y)?.0 } else { y };
            r_blocks.push(q_r.clone());
        }
    }

    if v % 2 == 0 {
        let orth = orthonormalize(&hcat(&c_blocks))?;
        let q_c = orth.q;
        let (q_r, r_r) = qr_thin(&a.apply_adjoint(&q_c))?;
        let small = tsvd(&r_r, p)?;
        Ok(KrylovOutcome {
            svd: SvdTriple {
                u: &q_c * &small.v,
                lambda: small.lambda,
                v: &q_r * &small.u,
            },
            basis_rank: orth.rank,
            basis_deficient: orth.deficient,
        })
    } else {
        let orth = orthonormalize(&hcat(&r_blocks))?;
        let q_r = orth.q;
        let (q_c, r_c) = qr_thin(&a.apply(&q_r))?;
        let small = tsvd(&r_c, p)?;
        Ok(KrylovOutcome {
            svd: SvdTriple {
                u: &q_c * &small.u,
                lambda: small.lambda,
                v: &q_r * &small.v,
            },
            basis_rank: orth.rank,
            basis_deficient: orth.deficient,
        })
    }
}

/// Restartable source of row blocks: one `pass` visits every row exactly
/// once. Restarting is the caller's way of taking another pass.
pub trait RowBlockSource {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;

    /// Stream one full pass, feeding each block to `sink`.
    fn pass(&mut self, sink: &mut dyn FnMut(&RowBlock)) -> Result<()>;
}

/// In-memory row source over a dense matrix.
pub struct DenseRowSource {
    a: Mat,
    block_rows: usize,
}

impl DenseRowSource {
    pub fn new(a: Mat, block_rows: usize) -> Self {
        assert!(block_rows >= 1);
        DenseRowSource { a, block_rows }
    }
}

impl RowBlockSource for DenseRowSource {
    fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    fn n_cols(&self) -> usize {
        self.a.ncols()
    }

    fn pass(&mut self, sink: &mut dyn FnMut(&RowBlock)) -> Result<()> {
        let mut start = 0;
        while start < self.a.nrows() {
            let len = self.block_rows.min(self.a.nrows() - start);
            sink(&RowBlock {
                first_row: start,
                rows: self.a.rows(start, len).into_owned(),
            });
            start += len;
        }
        Ok(())
    }
}

/// Counts passes over an inner source.
pub struct CountingRowSource<S> {
    inner: S,
    passes: usize,
}

impl<S: RowBlockSource> CountingRowSource<S> {
    pub fn new(inner: S) -> Self {
        CountingRowSource { inner, passes: 0 }
    }

    pub fn passes(&self) -> usize {
        self.passes
    }
}

impl<S: RowBlockSource> RowBlockSource for CountingRowSource<S> {
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    fn pass(&mut self, sink: &mut dyn FnMut(&RowBlock)) -> Result<()> {
        self.passes += 1;
        self.inner.pass(sink)
    }
}

/// One pass computing Y_c = A W and, optionally, Y_r_hat = A^T Y_c.
fn fused_pass(
    source: &mut dyn RowBlockSource,
    w: &Mat,
    accumulate_adjoint: bool,
) -> Result<(Mat, Option<Mat>)> {
    let n_rows = source.n_rows();
    let n_cols = source.n_cols();
    let k = w.ncols();
    if w.nrows() != n_cols {
        return Err(Error::dim("pass block width must match column count".into()));
    }
    let mut y_c = Mat::zeros(n_rows, k);
    let mut y_r_hat = if accumulate_adjoint {
        Some(Mat::zeros(n_cols, k))
    } else {
        None
    };
    let mut seen = vec![false; n_rows];
    let mut err: Option<Error> = None;
    source.pass(&mut |block: &RowBlock| {
        if err.is_some() {
            return;
        }
        let b = &block.rows;
        if b.ncols() != n_cols {
            err = Some(Error::Stream(format!(
                "row block has {} columns, expected {n_cols}",
                b.ncols()
            )));
            return;
        }
        let end = block.first_row + b.nrows();
        if end > n_rows {
            err = Some(Error::Stream(format!(
                "row block {}..{end} exceeds {n_rows} rows",
                block.first_row
            )));
            return;
        }
        for r in block.first_row..end {
            if seen[r] {
                err = Some(Error::Stream(format!("row {r} visited twice in one pass")));
                return;
            }
            seen[r] = true;
        }
        let yb = b * w;
        y_c.rows_mut(block.first_row, b.nrows()).copy_from(&yb);
        if let Some(acc) = y_r_hat.as_mut() {
            *acc += b.transpose() * yb;
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Stream(format!("row {missing} never visited in pass")));
    }
    Ok((y_c, y_r_hat))
}

/// A^T W in a single pass, accumulating row outer products.
fn adjoint_pass(source: &mut dyn RowBlockSource, w: &Mat) -> Result<Mat> {
    let n_rows = source.n_rows();
    let n_cols = source.n_cols();
    if w.nrows() != n_rows {
        return Err(Error::dim("adjoint pass needs an n_rows-high block".into()));
    }
    let mut acc = Mat::zeros(n_cols, w.ncols());
    let mut seen = vec![false; n_rows];
    let mut err: Option<Error> = None;
    source.pass(&mut |block: &RowBlock| {
        if err.is_some() {
            return;
        }
        let b = &block.rows;
        let end = block.first_row + b.nrows();
        if b.ncols() != n_cols || end > n_rows {
            err = Some(Error::Stream("bad row block in adjoint pass".into()));
            return;
        }
        for r in block.first_row..end {
            if seen[r] {
                err = Some(Error::Stream(format!("row {r} visited twice in one pass")));
                return;
            }
            seen[r] = true;
        }
        *acc += b.transpose() * w.rows(block.first_row, b.nrows());
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Stream(format!("row {missing} never visited in pass")));
    }
    Ok(acc)
}

/// Apply the inverse of the triangular factor from the fused pass, with a
/// pseudo-inverse fallback when the factor is ill conditioned.
fn solve_against_r(y: &Mat, r: &Mat) -> Result<(Mat, bool)> {
    let k = r.nrows();
    let dmax = (0..k).fold(0.0f64, |a, i| a.max(r[(i, i)].abs()));
    let deficient = dmax == 0.0 || (0..k).any(|i| r[(i, i)].abs() < RANK_REL_TOL * dmax);
    if deficient {
        Ok((times_pinv(y, r, RANK_REL_TOL)?, true))
    } else {
        // Y R^{-1} = (R^T \ Y^T)^T via an upper-triangular solve of R X = I?
        // Cheaper: solve R^T Z = Y^T is a lower solve; keep the upper solve
        // on the transposed system.
        let x = solve_upper_triangular(r, &Mat::identity(k, k));
        Ok((y * x, false))
    }
}

/// Block Krylov TSVD over a restartable row stream.
///
/// Each Krylov step fuses the A product and the A^T accumulation into one
/// pass; the final projection product takes one additional pass. Total
/// passes: ceil((v-1)/2) + 1. Matches [`block_krylov_svd`] with the same
/// seed on a materialized matrix, up to the conditioning of the fused
/// triangular solves.
pub fn block_krylov_row_stream(
    source: &mut dyn RowBlockSource,
    p: usize,
    l: usize,
    v: usize,
    rng: &mut RngHandle,
) -> Result<KrylovOutcome> {
    let (n_rows, n_cols) = (source.n_rows(), source.n_cols());
    validate(n_rows, n_cols, p, l, v)?;
    let k = p + l;
    let mut q_r = rng.gaussian_matrix(n_cols, k)?;
    let mut c_blocks: Vec<Mat> = Vec::new();
    let mut r_blocks: Vec<Mat> = Vec::new();

    // Krylov build: step pairs (2m-1, 2m) come out of pass m.
    let steps = v - 1;
    let full_passes = steps / 2;
    for m in 1..=full_passes {
        let j_odd = 2 * m - 1; // A product
        let j_even = 2 * m; // A^T product
        let need_adjoint = true;
        let (y_c, y_r_hat) = fused_pass(source, &q_r, need_adjoint)?;
        let y_r_hat = y_r_hat.expect("adjoint requested");
        let (q_c_m, r_c) = qr_thin(&y_c)?;
        let q_c_block = if j_odd < v - 1 { q_c_m } else { y_c };
        c_blocks.push(q_c_block);
        // A^T Q_c = (A^T Y_c) R_c^{-1}
        let (at_qc, _pinv_used) = solve_against_r(&y_r_hat, &r_c)?;
        q_r = if j_even < v - 1 {
            qr_thin(&at_qc)?.0
        } else {
            at_qc
        };
        r_blocks.push(q_r.clone());
    }
    if steps % 2 == 1 {
        // Trailing odd step: one more A product, no accumulation needed.
        let (y_c, _) = fused_pass(source, &q_r, false)?;
        let j = steps;
        let q_c_block = if j < v - 1 { qr_thin(&y_c)?.0 } else { y_c };
        c_blocks.push(q_c_block);
    }

    if v % 2 == 0 {
        let orth = orthonormalize(&hcat(&c_blocks))?;
        let q_c = orth.q;
        let b_r = adjoint_pass(source, &q_c)?;
        let (q_r, r_r) = qr_thin(&b_r)?;
        let small = tsvd(&r_r, p)?;
        Ok(KrylovOutcome {
            svd: SvdTriple {
                u: &q_c * &small.v,
                lambda: small.lambda,
                v: &q_r * &small.u,
            },
            basis_rank: orth.rank,
            basis_deficient: orth.deficient,
        })
    } else {
        let orth = orthonormalize(&hcat(&r_blocks))?;
        let q_r = orth.q;
        let (b_c, _) = fused_pass(source, &q_r, false)?;
        let (q_c, r_c) = qr_thin(&b_c)?;
        let small = tsvd(&r_c, p)?;
        Ok(KrylovOutcome {
            svd: SvdTriple {
                u: &q_c * &small.u,
                lambda: small.lambda,
                v: &q_r * &small.v,
            },
            basis_rank: orth.rank,
            basis_deficient: orth.deficient,
        })
    }
}

/// Pass count used by [`block_krylov_row_stream`].
pub fn row_stream_pass_count(v: usize) -> usize {
    (v - 1).div_ceil(2) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::frob;
    use crate::operator::CountingOp;
    use crate::subspace::{generalized_subspace_iter, SubspaceConfig};

    #[test]
    fn small_v_matches_generalized_subspace_iteration() {
        let mut rng_a = RngHandle::new(41);
        let a = rng_a.gaussian_matrix(26, 19).unwrap();
        for v in [2usize, 3] {
            let seed = 500 + v as u64;
            let mut rng = RngHandle::new(seed);
            let k = block_krylov_svd(&a, 4, 3, v, &mut rng).unwrap();
            let cfg = SubspaceConfig::with_views(4, 3, v, seed);
            let s = generalized_subspace_iter(&a, &cfg).unwrap();
            assert_eq!(k.svd.u, s.u, "v={v}");
            assert_eq!(k.svd.lambda, s.lambda, "v={v}");
            assert_eq!(k.svd.v, s.v, "v={v}");
        }
    }

    #[test]
    fn view_and_product_accounting() {
        let mut rng_a = RngHandle::new(43);
        let a = rng_a.gaussian_matrix(60, 45).unwrap();
        let (p, l) = (3, 2);
        for v in 2..=7usize {
            let c = CountingOp::new(&a);
            let mut rng = RngHandle::new(v as u64);
            block_krylov_svd(&c, p, l, v, &mut rng).unwrap();
            assert_eq!(c.views(), v, "views at v={v}");
            assert_eq!(
                c.vector_products(),
                (v + v / 2 - 1) * (p + l),
                "products at v={v}"
            );
        }
    }

    #[test]
    fn exact_rank_recovery_any_views() {
        let mut rng = RngHandle::new(45);
        let u = crate::dense::orthonormalize(&rng.gaussian_matrix(30, 3).unwrap())
            .unwrap()
            .q;
        let vv = crate::dense::orthonormalize(&rng.gaussian_matrix(24, 3).unwrap())
            .unwrap()
            .q;
        let mut core = Mat::zeros(3, 3);
        core[(0, 0)] = 4.0;
        core[(1, 1)] = 2.0;
        core[(2, 2)] = 1.0;
        let a = &u * core * vv.transpose();
        for v in 2..=6usize {
            let mut rng = RngHandle::new(600 + v as u64);
            let k = block_krylov_svd(&a, 3, 2, v, &mut rng).unwrap();
            let rel = frob(&(k.svd.reconstruct() - &a)) / frob(&a);
            assert!(rel < 1e-8, "v={v}: rel {rel}");
            // Exactly low-rank inputs collapse the concatenated basis.
            if v >= 4 {
                assert!(k.basis_deficient, "v={v} should flag deficiency");
            }
        }
    }

    #[test]
    fn row_stream_matches_dense_path() {
        let mut rng_a = RngHandle::new(47);
        let a = rng_a.gaussian_matrix(40, 28).unwrap();
        for v in 2..=6usize {
            let seed = 700 + v as u64;
            let mut rng = RngHandle::new(seed);
            let dense = block_krylov_svd(&a, 4, 3, v, &mut rng).unwrap();
            let mut source = DenseRowSource::new(a.clone(), 9);
            let mut rng = RngHandle::new(seed);
            let streamed = block_krylov_row_stream(&mut source, 4, 3, v, &mut rng).unwrap();
            let da = dense.svd.reconstruct();
            let ds = streamed.svd.reconstruct();
            let gap = frob(&(da.clone() - ds)) / frob(&da);
            assert!(gap < 1e-8, "v={v}: gap {gap}");
        }
    }

    #[test]
    fn row_stream_pass_accounting() {
        let mut rng_a = RngHandle::new(49);
        let a = rng_a.gaussian_matrix(36, 30).unwrap();
        for v in 2..=7usize {
            let mut source = CountingRowSource::new(DenseRowSource::new(a.clone(), 8));
            let mut rng = RngHandle::new(800 + v as u64);
            block_krylov_row_stream(&mut source, 3, 2, v, &mut rng).unwrap();
            assert_eq!(source.passes(), row_stream_pass_count(v), "v={v}");
        }
    }

    #[test]
    fn row_stream_single_restart_exact_rank() {
        let mut rng = RngHandle::new(51);
        let u = crate::dense::orthonormalize(&rng.gaussian_matrix(20, 2).unwrap())
            .unwrap()
            .q;
        let vv = crate::dense::orthonormalize(&rng.gaussian_matrix(16, 2).unwrap())
            .unwrap()
            .q;
        let mut core = Mat::zeros(2, 2);
        core[(0, 0)] = 3.0;
        core[(1, 1)] = 1.5;
        let a = &u * core * vv.transpose();
        let mut source = CountingRowSource::new(DenseRowSource::new(a.clone(), 5));
        let mut rng = RngHandle::new(53);
        let out = block_krylov_row_stream(&mut source, 2, 2, 3, &mut rng).unwrap();
        assert_eq!(source.passes(), 2);
        let rel = frob(&(out.svd.reconstruct() - &a)) / frob(&a);
        assert!(rel < 1e-8, "rel {rel}");
    }

    #[test]
    fn krylov_width_precondition() {
        let mut rng_a = RngHandle::new(55);
        let a = rng_a.gaussian_matrix(12, 10).unwrap();
        let mut rng = RngHandle::new(1);
        // v=6 even: (6/2)(p+l) = 3*5 = 15 > 12 rows.
        assert!(matches!(
            block_krylov_svd(&a, 3, 2, 6, &mut rng),
            Err(Error::Argument(_))
        ));
    }
}
