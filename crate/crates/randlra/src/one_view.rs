//! Single-pass (1-view) low-rank approximation.
//!
//! The sketch touches the matrix exactly once per side: Y_c = A Omega_r and
//! Y_r = A^T Omega_c (plus an optional SRFT core sketch Z = Phi_r^T A Phi_c,
//! fused into the same pass). Everything downstream is post-processing:
//!
//! - the Tropp-style solve with a flexible basis truncation l_c;
//! - the Woolfe-style variant that truncates both bases;
//! - an adaptive minimum-variance rule that picks l_c from the sketches;
//! - the extended bwz/bwz2 reconstructions that use the core sketch;
//! - a row-streamed QB factorization reaching 2-view accuracy in one pass.

use crate::dense::{lstsq_via_qr, qr_thin, svd_dense, times_pinv, tsvd, Mat, RANK_REL_TOL};
use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::rng::RngHandle;
use crate::srft::Srft;
use crate::types::SvdTriple;

/// Sketch-size plan: rank p, range oversampling l1, co-range oversampling
/// l2, basis truncation lc and, for extended plans, the SRFT width s.
///
/// The budget T counts sketch columns, T = 2p + l1 + l2, except for extended
/// plans where T is the memory budget also covering the s-by-s core sketch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OversamplingPlan {
    pub p: usize,
    pub l1: usize,
    pub l2: usize,
    pub lc: usize,
    pub budget: usize,
    pub srft_width: usize,
}

impl OversamplingPlan {
    /// Plan with explicit oversampling; T is derived.
    pub fn explicit(p: usize, l1: usize, l2: usize, lc: usize) -> Result<Self> {
        let plan = OversamplingPlan {
            p,
            l1,
            l2,
            lc,
            budget: 2 * p + l1 + l2,
            srft_width: 0,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Oversampling for a relatively flat singular spectrum.
    pub fn flat(p: usize, t: usize) -> Result<Self> {
        check_budget(p, t)?;
        let tf = t as f64;
        let pf = p as f64;
        let root = (pf * (tf - pf - 2.0) * (1.0 - 2.0 / (tf - 1.0))).sqrt();
        let inner = ((tf - 1.0) * (root - (pf - 1.0)) / (tf - 2.0 * pf - 1.0)).floor();
        let l1 = (inner as isize - p as isize).max(2) as usize;
        Self::baseline(p, t, l1)
    }

    /// Oversampling for a moderately decaying spectrum.
    pub fn decay(p: usize, t: usize) -> Result<Self> {
        check_budget(p, t)?;
        let l1 = ((t - 1) / 3).saturating_sub(p).max(2);
        Self::baseline(p, t, l1)
    }

    /// Oversampling for a rapidly decaying spectrum.
    pub fn rapid(p: usize, t: usize) -> Result<Self> {
        check_budget(p, t)?;
        let half = (t - 2) / 2;
        if half < p {
            return Err(Error::Budget(format!(
                "rapid plan needs T >= 2p + 2, got T={t}, p={p}"
            )));
        }
        let l1 = half - p;
        Self::baseline(p, t, l1)
    }

    fn baseline(p: usize, t: usize, l1: usize) -> Result<Self> {
        let used = 2 * p + l1;
        if used > t {
            return Err(Error::Budget(format!("plan needs 2p + l1 <= T, got l1={l1}, T={t}")));
        }
        let plan = OversamplingPlan {
            p,
            l1,
            l2: t - used,
            lc: l1,
            budget: t,
            srft_width: 0,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Near-equal split l1 ~ l2 with lc = floor(alpha * l1), 0 <= alpha <= 1.
    pub fn balanced(p: usize, t: usize, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::arg(format!("alpha must be in [0, 1], got {alpha}")));
        }
        if t < 2 * p {
            return Err(Error::Budget(format!(
                "balanced plan needs T >= 2p, got T={t}, p={p}"
            )));
        }
        let l1 = t / 2 - p;
        let l2 = t - 2 * p - l1;
        let lc = (alpha * l1 as f64).floor() as usize;
        let plan = OversamplingPlan {
            p,
            l1,
            l2,
            lc,
            budget: t,
            srft_width: 0,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Extended-sketch plan: l1 = l2 = floor(0.8 (floor(T/2) - p)) and the
    /// largest SRFT width s that fits the memory budget
    /// (2p + l1 + l2 + 1)(n_r + n_c) + s(s + 2) <= T (n_r + n_c).
    pub fn extended(p: usize, t: usize, n_r: usize, n_c: usize) -> Result<Self> {
        check_budget(p, t)?;
        let l1 = (0.8 * (t / 2 - p) as f64).floor() as usize;
        let dims = (n_r + n_c) as u128;
        let base = (2 * p + 2 * l1 + 1) as u128 * dims;
        let cap = t as u128 * dims;
        if base > cap {
            return Err(Error::Budget(format!("extended plan base storage exceeds T={t}")));
        }
        let spare = cap - base;
        // Largest s with s(s+2) <= spare.
        let mut s = (spare as f64).sqrt() as usize + 2;
        while s as u128 * (s as u128 + 2) > spare {
            s -= 1;
        }
        if s < p + l1 {
            return Err(Error::Budget(format!(
                "extended plan needs s >= p + l1 = {}, budget allows only s = {s}",
                p + l1
            )));
        }
        let plan = OversamplingPlan {
            p,
            l1,
            l2: l1,
            lc: l1,
            budget: t,
            srft_width: s,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::arg("plan needs p >= 1"));
        }
        if !(self.lc <= self.l1 && self.l1 <= self.l2) {
            return Err(Error::arg(format!(
                "plan needs lc <= l1 <= l2, got lc={}, l1={}, l2={}",
                self.lc, self.l1, self.l2
            )));
        }
        if self.srft_width == 0 {
            if self.budget != 2 * self.p + self.l1 + self.l2 {
                return Err(Error::arg(format!(
                    "plan budget {} != 2p + l1 + l2 = {}",
                    self.budget,
                    2 * self.p + self.l1 + self.l2
                )));
            }
        } else if self.srft_width < self.p + self.l1 {
            return Err(Error::arg("extended plan needs s >= p + l1"));
        }
        Ok(())
    }

    /// Memory footprint in stored numbers for (n_r, n_c), the quantity the
    /// budget T bounds as T (n_r + n_c).
    pub fn memory_numbers(&self, n_r: usize, n_c: usize) -> usize {
        let sketches = (2 * self.p + self.l1 + self.l2) * (n_r + n_c);
        if self.srft_width == 0 {
            sketches
        } else {
            sketches + (n_r + n_c) + self.srft_width * (self.srft_width + 2)
        }
    }
}

fn check_budget(p: usize, t: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::arg("plan needs p >= 1"));
    }
    if t < 2 * p + 6 {
        return Err(Error::Budget(format!(
            "budget must satisfy T >= 2p + 6, got T={t}, p={p}"
        )));
    }
    Ok(())
}

/// Sampling matrices and sketches from one logical pass over A.
pub struct SketchBundle {
    pub plan: OversamplingPlan,
    pub omega_r: Mat,
    pub omega_c: Mat,
    pub y_c: Mat,
    pub y_r: Mat,
    pub phi_r: Option<Srft>,
    pub phi_c: Option<Srft>,
    pub z: Option<Mat>,
}

/// Draw the sampling matrices and compute all sketches.
///
/// Exactly one `apply` and one `apply_adjoint`; when the plan carries an
/// SRFT width the core sketch shares the forward product. Orthonormalizing
/// the test matrices is optional and off by default.
pub fn sketch(
    a: &dyn LinearOperator,
    plan: &OversamplingPlan,
    rng: &mut RngHandle,
    orthonormalize_omegas: bool,
) -> Result<SketchBundle> {
    plan.validate()?;
    let (n_r, n_c) = (a.n_rows(), a.n_cols());
    let k1 = plan.p + plan.l1;
    let k2 = plan.p + plan.l2;
    if k1 > n_r.min(n_c) || k2 > n_r.min(n_c) {
        return Err(Error::arg(format!(
            "sketch widths (p+l1={k1}, p+l2={k2}) exceed min dimension {}",
            n_r.min(n_c)
        )));
    }
    if plan.srft_width > n_r.min(n_c) {
        return Err(Error::arg("SRFT width exceeds min dimension"));
    }

    let mut omega_r = rng.gaussian_matrix(n_c, k1)?;
    let mut omega_c = rng.gaussian_matrix(n_r, k2)?;
    if orthonormalize_omegas {
        omega_r = crate::dense::orthonormalize(&omega_r)?.q;
        omega_c = crate::dense::orthonormalize(&omega_c)?.q;
    }

    let (phi_r, phi_c) = if plan.srft_width > 0 {
        let pr = Srft::draw(rng, n_r, plan.srft_width)?;
        let pc = Srft::draw(rng, n_c, plan.srft_width)?;
        (Some(pr), Some(pc))
    } else {
        (None, None)
    };

    let (y_c, z) = match (&phi_r, &phi_c) {
        (Some(pr), Some(pc)) => {
            // Fuse A Omega_r and A Phi_c into one forward product.
            let mut block = Mat::zeros(n_c, k1 + plan.srft_width);
            block.columns_mut(0, k1).copy_from(&omega_r);
            block
                .columns_mut(k1, plan.srft_width)
                .copy_from(&pc.materialize());
            let out = a.apply(&block);
            let y_c = out.columns(0, k1).into_owned();
            let w = out.columns(k1, plan.srft_width).into_owned();
            (y_c, Some(pr.apply_adjoint_left(&w)))
        }
        _ => (a.apply(&omega_r), None),
    };
    let y_r = a.apply_adjoint(&omega_c);

    Ok(SketchBundle {
        plan: *plan,
        omega_r,
        omega_c,
        y_c,
        y_r,
        phi_r,
        phi_c,
        z,
    })
}

/// A 1-view result plus conditioning diagnostics.
#[derive(Clone, Debug)]
pub struct OneViewOutcome {
    pub svd: SvdTriple,
    /// True when a rank-deficient solve fell back to a pseudo-inverse.
    pub degraded: bool,
}

/// Left factor of width `w`: the full QR basis of Y_c when w = p + l1,
/// otherwise its leading w left singular vectors.
fn range_basis(bundle: &SketchBundle, width: usize) -> Result<Mat> {
    let k1 = bundle.plan.p + bundle.plan.l1;
    assert!(width >= 1 && width <= k1, "basis width out of range");
    let (q_c, r_c) = qr_thin(&bundle.y_c)?;
    if width == k1 {
        return Ok(q_c);
    }
    let hat = tsvd(&r_c, width)?;
    Ok(&q_c * hat.u)
}

/// Tropp-variant 1-view TSVD with the plan's lc truncation.
pub fn one_view_tropp(bundle: &SketchBundle) -> Result<OneViewOutcome> {
    one_view_tropp_with_lc(bundle, bundle.plan.lc)
}

/// Tropp variant with an explicit truncation parameter, reusing the same
/// sketches (used by the adaptive lc selectors).
pub fn one_view_tropp_with_lc(bundle: &SketchBundle, lc: usize) -> Result<OneViewOutcome> {
    let plan = &bundle.plan;
    if lc > plan.l1 {
        return Err(Error::arg(format!("lc = {lc} exceeds l1 = {}", plan.l1)));
    }
    let q_c = range_basis(bundle, plan.p + lc)?;
    let coeff = bundle.omega_c.transpose() * &q_c;
    let solve = lstsq_via_qr(&coeff, &bundle.y_r.transpose())?;
    let small = tsvd(&solve.x, plan.p)?;
    Ok(OneViewOutcome {
        svd: SvdTriple {
            u: &q_c * small.u,
            lambda: small.lambda,
            v: small.v,
        },
        degraded: solve.degraded,
    })
}

/// Woolfe-variant 1-view TSVD: both bases truncated to p + lc, small square
/// least-squares core.
pub fn one_view_woolfe(bundle: &SketchBundle) -> Result<OneViewOutcome> {
    let plan = &bundle.plan;
    let width = plan.p + plan.lc;
    let q_c = range_basis(bundle, width)?;

    let (q_r_full, r_r) = qr_thin(&bundle.y_r)?;
    let q_r = if width == plan.p + plan.l2 {
        q_r_full
    } else {
        let hat = tsvd(&r_r, width)?;
        &q_r_full * hat.u
    };

    let coeff = bundle.omega_c.transpose() * &q_c;
    let rhs = bundle.y_r.transpose() * &q_r;
    let solve = lstsq_via_qr(&coeff, &rhs)?;
    let small = tsvd(&solve.x, plan.p)?;
    Ok(OneViewOutcome {
        svd: SvdTriple {
            u: &q_c * small.u,
            lambda: small.lambda,
            v: &q_r * small.v,
        },
        degraded: solve.degraded,
    })
}

/// Outcome of the minimum-variance truncation search.
#[derive(Clone, Debug)]
pub struct MinVarSelection {
    /// Chosen truncation, in [0, l1) unless the candidate set is empty.
    pub lc: usize,
    /// Top singular values of X(lc) for every basis width from the smallest
    /// candidate through p + l1 (the last entry is neighbor data only).
    pub spectra: Vec<Vec<f64>>,
    /// Sample variance of the locally normalized spectrum per candidate.
    pub variances: Vec<f64>,
}

fn sample_variance(xs: &[f64]) -> f64 {
    if xs.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    let n = xs.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Pick lc by minimizing the sample variance of the locally normalized
/// singular values of X(lc) over all candidates 0 <= lc < l1.
///
/// One QR/SVD of Y_c and one Omega_c^T Q_c product are shared by all
/// candidates; each candidate only slices columns. Ties select the smallest
/// lc. With `pad_small_rank`, ranks below 3 are padded for the selection
/// spectra (off by default).
pub fn min_variance_lc(bundle: &SketchBundle, pad_small_rank: bool) -> Result<MinVarSelection> {
    let plan = &bundle.plan;
    let k1 = plan.p + plan.l1;
    let p_eff = if pad_small_rank && plan.p < 3 {
        3.min(k1)
    } else {
        plan.p
    };
    let w_min = p_eff;
    if plan.l1 == 0 || w_min >= k1 {
        return Ok(MinVarSelection {
            lc: plan.l1,
            spectra: Vec::new(),
            variances: Vec::new(),
        });
    }

    // Shared factors: left singular vectors of Y_c and the projected
    // coefficient matrix, sliced per candidate.
    let (q0, r0) = qr_thin(&bundle.y_c)?;
    let r0_svd = svd_dense(&r0)?;
    let q_full = &q0 * &r0_svd.u;
    let w_full = bundle.omega_c.transpose() * &q_full;
    let rhs = bundle.y_r.transpose();

    let mut spectra: Vec<Vec<f64>> = Vec::new();
    for w in w_min..=k1 {
        let coeff = w_full.columns(0, w).into_owned();
        let solve = lstsq_via_qr(&coeff, &rhs)?;
        let sv = svd_dense(&solve.x)?.lambda;
        spectra.push(sv[..p_eff.min(sv.len())].to_vec());
    }

    let n_candidates = k1 - w_min; // widths w_min .. k1-1
    let mut variances = Vec::with_capacity(n_candidates);
    for c in 0..n_candidates {
        let here = &spectra[c];
        let next = &spectra[c + 1];
        let mut s = Vec::with_capacity(3 * p_eff);
        if c > 0 {
            let prev = &spectra[c - 1];
            for i in 0..p_eff {
                s.push(prev[i] / here[i]);
            }
        }
        for i in 0..p_eff {
            s.push(here[i] / here[i]);
        }
        for i in 0..p_eff {
            s.push(next[i] / here[i]);
        }
        variances.push(sample_variance(&s));
    }

    let mut best = 0usize;
    for c in 1..n_candidates {
        if variances[c] < variances[best] {
            best = c;
        }
    }
    let lc = (w_min + best) - plan.p;
    Ok(MinVarSelection {
        lc,
        spectra,
        variances,
    })
}

/// Run the Tropp variant with the minimum-variance lc.
pub fn one_view_min_var(
    bundle: &SketchBundle,
    pad_small_rank: bool,
) -> Result<(OneViewOutcome, MinVarSelection)> {
    let sel = min_variance_lc(bundle, pad_small_rank)?;
    let out = one_view_tropp_with_lc(bundle, sel.lc)?;
    Ok((out, sel))
}

/// Which extended-sketch reconstruction to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtendedVariant {
    /// Truncation outside the core product.
    Bwz,
    /// Truncation after assembling the full core; substantially more
    /// accurate at the same budget.
    Bwz2,
}

/// Low-rank approximation from the extended sketch (Z required).
pub fn extended_sketch_approx(
    bundle: &SketchBundle,
    variant: ExtendedVariant,
) -> Result<OneViewOutcome> {
    let plan = &bundle.plan;
    if plan.l1 != plan.l2 {
        return Err(Error::arg("extended sketch assumes l1 = l2"));
    }
    let z = bundle
        .z
        .as_ref()
        .ok_or_else(|| Error::arg("bundle has no core sketch Z; use an extended plan"))?;
    let phi_r = bundle.phi_r.as_ref().expect("phi_r present when z is");
    let phi_c = bundle.phi_c.as_ref().expect("phi_c present when z is");

    let (q_c, _) = qr_thin(&bundle.y_c)?;
    let (q_r, _) = qr_thin(&bundle.y_r)?;
    let (u_c, t_c) = qr_thin(&phi_r.apply_adjoint_left(&q_c))?;
    let (u_r, t_r) = qr_thin(&phi_c.apply_adjoint_left(&q_r))?;

    let tri_deficient = |t: &Mat| -> bool {
        let dmax = (0..t.nrows()).fold(0.0f64, |a, i| a.max(t[(i, i)].abs()));
        dmax == 0.0 || (0..t.nrows()).any(|i| t[(i, i)].abs() < RANK_REL_TOL * dmax)
    };
    let degraded = tri_deficient(&t_c) || tri_deficient(&t_r);

    let core = u_c.transpose() * z * &u_r;
    let t_r_adj = t_r.transpose();
    let small = match variant {
        ExtendedVariant::Bwz => {
            let truncated = tsvd(&core, plan.p)?.reconstruct();
            let m = times_pinv(
                &crate::dense::pinv_times(&t_c, &truncated, RANK_REL_TOL)?,
                &t_r_adj,
                RANK_REL_TOL,
            )?;
            tsvd(&m, plan.p)?
        }
        ExtendedVariant::Bwz2 => {
            let m = times_pinv(
                &crate::dense::pinv_times(&t_c, &core, RANK_REL_TOL)?,
                &t_r_adj,
                RANK_REL_TOL,
            )?;
            tsvd(&m, plan.p)?
        }
    };
    Ok(OneViewOutcome {
        svd: SvdTriple {
            u: &q_c * small.u,
            lambda: small.lambda,
            v: &q_r * small.v,
        },
        degraded,
    })
}

/// One block of contiguous rows of A, starting at `first_row`.
#[derive(Clone, Debug)]
pub struct RowBlock {
    pub first_row: usize,
    pub rows: Mat,
}

/// Single-pass QB factorization over a row stream.
///
/// Consumes each row exactly once, accumulating Y_c = A Omega_r row by row
/// and Y_r_hat = A^T Y_c as a running sum; equals the basic 2-view method
/// with the same Omega_r whenever R_c is well conditioned.
pub fn row_stream_qb(
    blocks: impl IntoIterator<Item = RowBlock>,
    n_rows: usize,
    n_cols: usize,
    omega_r: &Mat,
    p: usize,
) -> Result<OneViewOutcome> {
    let k = omega_r.ncols();
    if omega_r.nrows() != n_cols {
        return Err(Error::dim(format!(
            "omega_r has {} rows, matrix has {} columns",
            omega_r.nrows(),
            n_cols
        )));
    }
    if p == 0 || p > k {
        return Err(Error::arg(format!(
            "rank p = {p} out of range for sketch width {k}"
        )));
    }

    let mut y_c = Mat::zeros(n_rows, k);
    let mut y_r_hat = Mat::zeros(n_cols, k);
    let mut seen = vec![false; n_rows];
    for block in blocks {
        let b = &block.rows;
        if b.ncols() != n_cols {
            return Err(Error::Stream(format!(
                "row block has {} columns, expected {n_cols}",
                b.ncols()
            )));
        }
        let end = block.first_row + b.nrows();
        if end > n_rows {
            return Err(Error::Stream(format!(
                "row block {}..{end} exceeds {n_rows} rows",
                block.first_row
            )));
        }
        for r in block.first_row..end {
            if seen[r] {
                return Err(Error::Stream(format!("row {r} visited twice")));
            }
            seen[r] = true;
        }
        let yc_block = b * omega_r;
        y_c.rows_mut(block.first_row, b.nrows()).copy_from(&yc_block);
        y_r_hat += b.transpose() * yc_block;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Stream(format!("row {missing} never visited")));
    }

    let (q_c, r_c) = qr_thin(&y_c)?;
    let dmax = (0..k).fold(0.0f64, |a, i| a.max(r_c[(i, i)].abs()));
    let deficient = dmax == 0.0 || (0..k).any(|i| r_c[(i, i)].abs() < RANK_REL_TOL * dmax);
    // B^T R_c = Y_r_hat, i.e. R_c^T B = Y_r_hat^T.
    let b = if deficient {
        times_pinv(&y_r_hat, &r_c, RANK_REL_TOL)?.transpose()
    } else {
        crate::dense::solve_lower_triangular(&r_c.transpose(), &y_r_hat.transpose())
    };
    let small = tsvd(&b, p)?;
    Ok(OneViewOutcome {
        svd: SvdTriple {
            u: &q_c * small.u,
            lambda: small.lambda,
            v: small.v,
        },
        degraded: deficient,
    })
}

/// Chop a dense matrix into row blocks of at most `block_rows` rows.
pub fn dense_row_blocks(a: &Mat, block_rows: usize) -> Vec<RowBlock> {
    assert!(block_rows >= 1);
    let mut out = Vec::new();
    let mut start = 0;
    while start < a.nrows() {
        let len = block_rows.min(a.nrows() - start);
        out.push(RowBlock {
            first_row: start,
            rows: a.rows(start, len).into_owned(),
        });
        start += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::frob;
    use crate::operator::CountingOp;

    fn low_rank_matrix(n_r: usize, n_c: usize, vals: &[f64], seed: u64) -> Mat {
        let mut rng = RngHandle::new(seed);
        let u = crate::dense::orthonormalize(&rng.gaussian_matrix(n_r, vals.len()).unwrap())
            .unwrap()
            .q;
        let v = crate::dense::orthonormalize(&rng.gaussian_matrix(n_c, vals.len()).unwrap())
            .unwrap()
            .q;
        let mut core = Mat::zeros(vals.len(), vals.len());
        for (i, &s) in vals.iter().enumerate() {
            core[(i, i)] = s;
        }
        &u * core * v.transpose()
    }

    #[test]
    fn plan_flat_hand_values() {
        let a = OversamplingPlan::flat(5, 24).unwrap();
        assert_eq!((a.l1, a.l2, a.lc), (3, 11, 3));
        let b = OversamplingPlan::flat(5, 16).unwrap();
        assert_eq!((b.l1, b.l2), (2, 4));
    }

    #[test]
    fn plan_decay_hand_values() {
        let a = OversamplingPlan::decay(5, 24).unwrap();
        assert_eq!((a.l1, a.l2), (2, 12));
        let b = OversamplingPlan::decay(5, 40).unwrap();
        assert_eq!((b.l1, b.l2), (8, 22));
    }

    #[test]
    fn plan_rapid_hand_values() {
        let a = OversamplingPlan::rapid(5, 24).unwrap();
        assert_eq!((a.l1, a.l2), (6, 8));
        let b = OversamplingPlan::rapid(5, 16).unwrap();
        assert_eq!((b.l1, b.l2), (2, 4));
    }

    #[test]
    fn plan_balanced_hand_values() {
        let a = OversamplingPlan::balanced(5, 24, 0.5).unwrap();
        assert_eq!((a.l1, a.l2, a.lc), (7, 7, 3));
        let b = OversamplingPlan::balanced(5, 24, 1.0).unwrap();
        assert_eq!(b.lc, b.l1);
        let c = OversamplingPlan::balanced(5, 24, 0.0).unwrap();
        assert_eq!(c.lc, 0);
    }

    #[test]
    fn plan_extended_hand_values() {
        let a = OversamplingPlan::extended(5, 24, 1000, 1000).unwrap();
        assert_eq!((a.l1, a.l2), (5, 5));
        assert_eq!(a.srft_width, 76);
        // Memory identity from the construction.
        assert!(
            (2 * a.p + a.l1 + a.l2 + 1) * 2000 + a.srft_width * (a.srft_width + 2)
                <= a.budget * 2000
        );
    }

    #[test]
    fn plan_extended_s_monotone_in_budget() {
        let mut last = 0;
        for t in [20, 24, 30, 40, 60, 90] {
            let p = OversamplingPlan::extended(5, t, 500, 400).unwrap();
            assert!(p.srft_width >= last, "s not monotone at T={t}");
            last = p.srft_width;
        }
    }

    #[test]
    fn plan_budget_too_small() {
        assert!(matches!(OversamplingPlan::flat(5, 15), Err(Error::Budget(_))));
        assert!(matches!(
            OversamplingPlan::extended(5, 15, 100, 100),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn sketch_matches_definition_and_counts_views() {
        let mut rng_a = RngHandle::new(1);
        let a = rng_a.gaussian_matrix(40, 30).unwrap();
        let plan = OversamplingPlan::balanced(4, 18, 0.5).unwrap();
        let counter = CountingOp::new(&a);
        let mut rng = RngHandle::new(2);
        let bundle = sketch(&counter, &plan, &mut rng, false).unwrap();
        assert_eq!(counter.applies(), 1);
        assert_eq!(counter.adjoint_applies(), 1);
        assert!(frob(&(&a * &bundle.omega_r - &bundle.y_c)) < 1e-14 * frob(&bundle.y_c));
        assert!(
            frob(&(a.transpose() * &bundle.omega_c - &bundle.y_r)) < 1e-14 * frob(&bundle.y_r)
        );
    }

    #[test]
    fn sketch_z_matches_dense_srft_product() {
        let mut rng_a = RngHandle::new(3);
        let a = rng_a.gaussian_matrix(50, 40).unwrap();
        let plan = OversamplingPlan::extended(3, 14, 50, 40).unwrap();
        let counter = CountingOp::new(&a);
        let mut rng = RngHandle::new(4);
        let bundle = sketch(&counter, &plan, &mut rng, false).unwrap();
        // Still one pass per side with the fused product.
        assert_eq!(counter.applies(), 1);
        assert_eq!(counter.adjoint_applies(), 1);
        let z = bundle.z.as_ref().unwrap();
        let dense = bundle.phi_r.as_ref().unwrap().materialize().transpose()
            * &a
            * bundle.phi_c.as_ref().unwrap().materialize();
        assert!(frob(&(z - &dense)) < 1e-12 * frob(&dense).max(1.0));
    }

    #[test]
    fn tropp_recovers_exact_rank() {
        let a = low_rank_matrix(30, 25, &[3.0, 2.0, 1.0], 5);
        let plan = OversamplingPlan::explicit(3, 3, 3, 1).unwrap();
        let mut rng = RngHandle::new(6);
        let bundle = sketch(&a, &plan, &mut rng, false).unwrap();
        let out = one_view_tropp(&bundle).unwrap();
        let rel = frob(&(out.svd.reconstruct() - &a)) / frob(&a);
        assert!(rel < 1e-8, "rel {rel}");
    }

    #[test]
    fn woolfe_recovers_exact_rank_and_is_orthonormal() {
        let a = low_rank_matrix(28, 22, &[4.0, 2.0, 1.0], 7);
        let plan = OversamplingPlan::explicit(3, 4, 5, 2).unwrap();
        let mut rng = RngHandle::new(8);
        let bundle = sketch(&a, &plan, &mut rng, false).unwrap();
        let out = one_view_woolfe(&bundle).unwrap();
        let rel = frob(&(out.svd.reconstruct() - &a)) / frob(&a);
        assert!(rel < 1e-8, "rel {rel}");
        assert!(out.svd.orthonormality_defect() < 1e-10);
    }

    #[test]
    fn lc_equal_l1_is_plain_qr_baseline() {
        let mut rng_a = RngHandle::new(9);
        let a = rng_a.gaussian_matrix(35, 28).unwrap();
        let plan = OversamplingPlan::explicit(4, 3, 6, 3).unwrap();
        let mut rng = RngHandle::new(10);
        let bundle = sketch(&a, &plan, &mut rng, false).unwrap();
        let full = one_view_tropp(&bundle).unwrap();
        // The truncated path at full width must match the plain-QR path up
        // to the basis rotation.
        let trunc = one_view_tropp_with_lc(&bundle, 3).unwrap();
        let d = frob(&(full.svd.reconstruct() - trunc.svd.reconstruct()));
        assert!(d < 1e-9 * frob(&full.svd.reconstruct()));
    }

    #[test]
    fn min_var_matches_exhaustive_oracle() {
        for seed in 0..8u64 {
            let mut rng_a = RngHandle::new(100 + seed);
            let a = rng_a.gaussian_matrix(45, 35).unwrap();
            let plan = OversamplingPlan::balanced(4, 22, 0.5).unwrap();
            let mut rng = RngHandle::new(200 + seed);
            let bundle = sketch(&a, &plan, &mut rng, false).unwrap();
            let sel = min_variance_lc(&bundle, false).unwrap();

            // Independent oracle: rebuild every X(lc) spectrum from scratch
            // and re-evaluate the variance definition.
            let p = plan.p;
            let mut spectra = Vec::new();
            for lc in 0..=plan.l1 {
                let q_c = range_basis(&bundle, p + lc).unwrap();
                let coeff = bundle.omega_c.transpose() * &q_c;
                let x = lstsq_via_qr(&coeff, &bundle.y_r.transpose()).unwrap().x;
                let sv = svd_dense(&x).unwrap().lambda;
                spectra.push(sv[..p].to_vec());
            }
            let mut best = None;
            for lc in 0..plan.l1 {
                let mut s = Vec::new();
                if lc > 0 {
                    for i in 0..p {
                        s.push(spectra[lc - 1][i] / spectra[lc][i]);
                    }
                }
                for _ in 0..p {
                    s.push(1.0);
                }
                for i in 0..p {
                    s.push(spectra[lc + 1][i] / spectra[lc][i]);
                }
                let var = sample_variance(&s);
                match best {
                    None => best = Some((lc, var)),
                    Some((_, bv)) if var < bv => best = Some((lc, var)),
                    _ => {}
                }
            }
            assert_eq!(sel.lc, best.unwrap().0, "seed {seed}");
        }
    }

    #[test]
    fn min_var_single_candidate() {
        let mut rng_a = RngHandle::new(11);
        let a = rng_a.gaussian_matrix(20, 16).unwrap();
        let plan = OversamplingPlan::explicit(3, 1, 4, 0).unwrap();
        let mut rng = RngHandle::new(12);
        let bundle = sketch(&a, &plan, &mut rng, false).unwrap();
        let sel = min_variance_lc(&bundle, false).unwrap();
        assert_eq!(sel.lc, 0);
        assert_eq!(sel.variances.len(), 1);
    }

    #[test]
    fn min_var_l1_zero_trivial() {
        let mut rng_a = RngHandle::new(13);
        let a = rng_a.gaussian_matrix(20, 16).unwrap();
        let plan = OversamplingPlan::explicit(3, 0, 2, 0).unwrap();
        let mut rng = RngHandle::new(14);
        let bundle = sketch(&a, &plan, &mut rng, false).unwrap();
        let sel = min_variance_lc(&bundle, false).unwrap();
        assert_eq!(sel.lc, 0);
    }

    #[test]
    fn extended_recovers_exact_rank() {
        let a = low_rank_matrix(60, 50, &[5.0, 3.0, 1.0], 15);
        // Generous SRFT width.
        let plan = OversamplingPlan {
            p: 3,
            l1: 3,
            l2: 3,
            lc: 3,
            budget: 12,
            srft_width: 30,
        };
        let mut rng = RngHandle::new(16);
        let bundle = sketch(&a, &plan, &mut rng, false).unwrap();
        for variant in [ExtendedVariant::Bwz, ExtendedVariant::Bwz2] {
            let out = extended_sketch_approx(&bundle, variant).unwrap();
            let rel = frob(&(out.svd.reconstruct() - &a)) / frob(&a);
            assert!(rel < 1e-8, "{variant:?}: rel {rel}");
        }
    }

    #[test]
    fn extended_requires_core_sketch() {
        let mut rng_a = RngHandle::new(17);
        let a = rng_a.gaussian_matrix(20, 18).unwrap();
        let plan = OversamplingPlan::explicit(3, 2, 2, 2).unwrap();
        let mut rng = RngHandle::new(18);
        let bundle = sketch(&a, &plan, &mut rng, false).unwrap();
        assert!(extended_sketch_approx(&bundle, ExtendedVariant::Bwz2).is_err());
    }

    #[test]
    fn row_stream_matches_two_view_oracle() {
        let mut rng_a = RngHandle::new(19);
        let a = rng_a.gaussian_matrix(30, 20).unwrap();
        let mut rng = RngHandle::new(20);
        let omega = rng.gaussian_matrix(20, 8).unwrap();
        let stream = row_stream_qb(dense_row_blocks(&a, 7), 30, 20, &omega, 5).unwrap();
        // 2-view oracle with the same Omega_r.
        let (q_c, _) = qr_thin(&(&a * &omega)).unwrap();
        let b = a.transpose() * &q_c;
        let small = tsvd(&b.transpose(), 5).unwrap();
        let oracle = SvdTriple {
            u: &q_c * small.u,
            lambda: small.lambda,
            v: small.v,
        };
        let d = frob(&(stream.svd.reconstruct() - oracle.reconstruct()))
            / frob(&oracle.reconstruct());
        assert!(d < 1e-10, "gap {d}");
        assert!(!stream.degraded);
    }

    #[test]
    fn row_stream_single_row_rank_one() {
        let a = Mat::from_column_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let mut rng = RngHandle::new(21);
        let omega = rng.gaussian_matrix(4, 1).unwrap();
        let out = row_stream_qb(dense_row_blocks(&a, 1), 1, 4, &omega, 1).unwrap();
        let rel = frob(&(out.svd.reconstruct() - &a)) / frob(&a);
        assert!(rel < 1e-12);
    }

    #[test]
    fn row_stream_order_invariant_accumulation() {
        let mut rng_a = RngHandle::new(22);
        let a = rng_a.gaussian_matrix(24, 15).unwrap();
        let mut rng = RngHandle::new(23);
        let omega = rng.gaussian_matrix(15, 6).unwrap();
        let fwd = row_stream_qb(dense_row_blocks(&a, 5), 24, 15, &omega, 4).unwrap();
        let mut rev = dense_row_blocks(&a, 5);
        rev.reverse();
        let bwd = row_stream_qb(rev, 24, 15, &omega, 4).unwrap();
        let d = frob(&(fwd.svd.reconstruct() - bwd.svd.reconstruct()));
        assert!(d < 1e-12 * frob(&fwd.svd.reconstruct()));
    }

    #[test]
    fn row_stream_contract_violations() {
        let a = Mat::zeros(4, 3);
        let _ = a;
        let omega = Mat::zeros(3, 2);
        // Wrong width.
        let bad = vec![RowBlock {
            first_row: 0,
            rows: Mat::zeros(4, 2),
        }];
        assert!(matches!(
            row_stream_qb(bad, 4, 3, &omega, 1),
            Err(Error::Stream(_))
        ));
        // Duplicate rows.
        let dup = vec![
            RowBlock {
                first_row: 0,
                rows: Mat::zeros(3, 3),
            },
            RowBlock {
                first_row: 2,
                rows: Mat::zeros(2, 3),
            },
        ];
        assert!(matches!(
            row_stream_qb(dup, 4, 3, &omega, 1),
            Err(Error::Stream(_))
        ));
        // Missing rows.
        let missing = vec![RowBlock {
            first_row: 0,
            rows: Mat::zeros(2, 3),
        }];
        assert!(matches!(
            row_stream_qb(missing, 4, 3, &omega, 1),
            Err(Error::Stream(_))
        ));
    }

    #[test]
    fn memory_accounting_for_extended_plans() {
        for t in [24usize, 44, 64] {
            let plan = OversamplingPlan::extended(5, t, 1000, 1000).unwrap();
            assert!(plan.memory_numbers(1000, 1000) <= t * 2000, "T={t}");
        }
    }
}
