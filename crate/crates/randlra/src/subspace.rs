//! Standard and generalized randomized subspace iteration.
//!
//! The generalized iteration alternates products with A and A^T, with a thin
//! QR renormalization after every product, and stops after exactly `v` views.
//! An even `v` reproduces the standard method bit for bit; an odd `v` stops
//! half way through an iteration and post-processes the co-range factor
//! instead. A V2 post-processing variant forms the small normal matrix
//! B^T B rather than factoring the long QB product.

use crate::dense::{frob, qr_thin, svd_dense, tevd_psd, tsvd, Mat};
use crate::error::{Error, Result};
use crate::norms::{operator_spectral_norm, CorangeResidualOp};
use crate::operator::LinearOperator;
use crate::rng::RngHandle;
use crate::types::SvdTriple;

/// Parameters for the subspace iteration family.
///
/// `views` is the total budget of matrix views (applications of A or A^T).
/// The standard method uses an even budget 2(q+1).
#[derive(Clone, Copy, Debug)]
pub struct SubspaceConfig {
    pub p: usize,
    pub l: usize,
    pub views: usize,
    pub seed: u64,
}

impl SubspaceConfig {
    pub fn with_views(p: usize, l: usize, views: usize, seed: u64) -> Self {
        SubspaceConfig { p, l, views, seed }
    }

    /// Standard-iteration parametrization: q iterations mean 2(q+1) views.
    pub fn with_iterations(p: usize, l: usize, q: usize, seed: u64) -> Self {
        SubspaceConfig {
            p,
            l,
            views: 2 * (q + 1),
            seed,
        }
    }

    pub fn validate(&self, op: &dyn LinearOperator) -> Result<()> {
        if self.p == 0 {
            return Err(Error::arg("target rank p must be >= 1"));
        }
        let min_dim = op.n_rows().min(op.n_cols());
        if self.p + self.l > min_dim {
            return Err(Error::arg(format!(
                "p + l = {} exceeds min dimension {}",
                self.p + self.l,
                min_dim
            )));
        }
        if self.views < 2 {
            return Err(Error::arg("view budget must be >= 2"));
        }
        Ok(())
    }
}

/// Per-view singular values of the small triangular factors, for convergence
/// monitoring.
#[derive(Clone, Debug, Default)]
pub struct SubspaceTrace {
    pub per_view_singular_values: Vec<Vec<f64>>,
}

/// Randomized SVD by standard subspace iteration (even view budget).
///
/// Equivalent to [`generalized_subspace_iter`] with `views = 2(q+1)` and the
/// same seed, bit for bit.
pub fn subspace_iter_standard(a: &dyn LinearOperator, cfg: &SubspaceConfig) -> Result<SvdTriple> {
    cfg.validate(a)?;
    if cfg.views % 2 != 0 {
        return Err(Error::arg(format!(
            "standard subspace iteration uses an even view budget, got {}",
            cfg.views
        )));
    }
    let q = cfg.views / 2 - 1;
    let k = cfg.p + cfg.l;
    let mut rng = RngHandle::new(cfg.seed);
    let omega = rng.gaussian_matrix(a.n_cols(), k)?;

    let (mut q_c, _) = qr_thin(&a.apply(&omega))?;
    let mut q_r;
    for _ in 0..q {
        (q_r, _) = qr_thin(&a.apply_adjoint(&q_c))?;
        (q_c, _) = qr_thin(&a.apply(&q_r))?;
    }
    let (q_r, r_r) = qr_thin(&a.apply_adjoint(&q_c))?;
    let small = tsvd(&r_r, cfg.p)?;
    // R_r = V_hat Lambda U_hat^T, so U = Q_c U_hat and V = Q_r V_hat.
    Ok(SvdTriple {
        u: &q_c * &small.v,
        lambda: small.lambda,
        v: &q_r * &small.u,
    })
}

/// Approximate range (odd v) or co-range (even v) basis with v >= 1 views.
pub fn qr_qc(
    a: &dyn LinearOperator,
    p: usize,
    l: usize,
    v: usize,
    rng: &mut RngHandle,
) -> Result<Mat> {
    if v < 1 {
        return Err(Error::arg("qr_qc needs v >= 1"));
    }
    if p == 0 || p + l > a.n_rows().min(a.n_cols()) {
        return Err(Error::arg(format!(
            "qr_qc needs 1 <= p and p + l <= min dim, got p={p}, l={l}"
        )));
    }
    let mut q_r = rng.gaussian_matrix(a.n_cols(), p + l)?;
    let mut q_c = Mat::zeros(0, 0);
    for j in 1..=v {
        if j % 2 == 1 {
            (q_c, _) = qr_thin(&a.apply(&q_r))?;
        } else {
            (q_r, _) = qr_thin(&a.apply_adjoint(&q_c))?;
        }
    }
    Ok(if v % 2 == 0 { q_r } else { q_c })
}

/// Randomized SVD by generalized subspace iteration with any view budget
/// v >= 2.
pub fn generalized_subspace_iter(
    a: &dyn LinearOperator,
    cfg: &SubspaceConfig,
) -> Result<SvdTriple> {
    Ok(run_generalized(a, cfg, None)?.0)
}

/// Same as [`generalized_subspace_iter`], also recording the singular values
/// of every small triangular factor.
pub fn generalized_subspace_iter_traced(
    a: &dyn LinearOperator,
    cfg: &SubspaceConfig,
) -> Result<(SvdTriple, SubspaceTrace)> {
    let mut trace = SubspaceTrace::default();
    let out = run_generalized(a, cfg, Some(&mut trace))?;
    Ok((out.0, trace))
}

fn run_generalized(
    a: &dyn LinearOperator,
    cfg: &SubspaceConfig,
    mut trace: Option<&mut SubspaceTrace>,
) -> Result<(SvdTriple, ())> {
    cfg.validate(a)?;
    let k = cfg.p + cfg.l;
    let mut rng = RngHandle::new(cfg.seed);
    let mut q_r = rng.gaussian_matrix(a.n_cols(), k)?;
    let mut q_c = Mat::zeros(0, 0);
    let mut r_c = Mat::zeros(0, 0);
    let mut r_r = Mat::zeros(0, 0);
    for j in 1..=cfg.views {
        if j % 2 == 1 {
            (q_c, r_c) = qr_thin(&a.apply(&q_r))?;
            if let Some(t) = trace.as_deref_mut() {
                t.per_view_singular_values.push(svd_dense(&r_c)?.lambda);
            }
        } else {
            (q_r, r_r) = qr_thin(&a.apply_adjoint(&q_c))?;
            if let Some(t) = trace.as_deref_mut() {
                t.per_view_singular_values.push(svd_dense(&r_r)?.lambda);
            }
        }
    }
    let triple = if cfg.views % 2 == 0 {
        let small = tsvd(&r_r, cfg.p)?;
        SvdTriple {
            u: &q_c * &small.v,
            lambda: small.lambda,
            v: &q_r * &small.u,
        }
    } else {
        let small = tsvd(&r_c, cfg.p)?;
        SvdTriple {
            u: &q_c * &small.u,
            lambda: small.lambda,
            v: &q_r * &small.v,
        }
    };
    Ok((triple, ()))
}

/// Floor for usable squared singular values relative to the largest, below
/// which the V2 post-processing would divide by (near) zero.
const DEGENERATE_REL_FLOOR: f64 = 1e-14;

/// Generalized subspace iteration with eigendecomposition post-processing.
///
/// Builds the basis with v-1 views, forms the small normal matrix B^T B with
/// the final view and recovers the missing side by scaling with 1/lambda.
/// Fails with a degenerate-spectrum error when a leading singular value
/// collapses, since the scaling is then undefined.
pub fn generalized_subspace_iter_v2(
    a: &dyn LinearOperator,
    cfg: &SubspaceConfig,
) -> Result<SvdTriple> {
    cfg.validate(a)?;
    let mut rng = RngHandle::new(cfg.seed);
    if cfg.views % 2 == 0 {
        let q_c = qr_qc(a, cfg.p, cfg.l, cfg.views - 1, &mut rng)?;
        let b_r = a.apply_adjoint(&q_c);
        let (lam_sq, u_hat) = tevd_psd(&(b_r.transpose() * &b_r), cfg.p)?;
        let lambda = checked_sqrt(&lam_sq)?;
        let u = &q_c * &u_hat;
        let v = scale_by_inverse(&(&b_r * &u_hat), &lambda);
        Ok(SvdTriple { u, lambda, v })
    } else {
        let q_r = qr_qc(a, cfg.p, cfg.l, cfg.views - 1, &mut rng)?;
        let b_c = a.apply(&q_r);
        let (lam_sq, v_hat) = tevd_psd(&(b_c.transpose() * &b_c), cfg.p)?;
        let lambda = checked_sqrt(&lam_sq)?;
        let v = &q_r * &v_hat;
        let u = scale_by_inverse(&(&b_c * &v_hat), &lambda);
        Ok(SvdTriple { u, lambda, v })
    }
}

fn checked_sqrt(lam_sq: &[f64]) -> Result<Vec<f64>> {
    let top = lam_sq.first().copied().unwrap_or(0.0);
    let floor = DEGENERATE_REL_FLOOR * top;
    for (i, &s) in lam_sq.iter().enumerate() {
        if s <= floor || s <= 0.0 {
            return Err(Error::DegenerateSpectrum {
                index: i,
                value: s,
                floor,
            });
        }
    }
    Ok(lam_sq.iter().map(|s| s.sqrt()).collect())
}

fn scale_by_inverse(m: &Mat, lambda: &[f64]) -> Mat {
    let mut out = m.clone();
    for (j, &s) in lambda.iter().enumerate() {
        for i in 0..out.nrows() {
            out[(i, j)] /= s;
        }
    }
    out
}

/// What a downstream consumer needs most accurately from the factorization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApproximationGoal {
    LeftVectors,
    RightVectors,
    NormalMatrix,
}

/// Which input to hand the iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputSide {
    /// Run on J itself.
    Matrix,
    /// Run on J^T.
    Adjoint,
}

/// For a view budget v, pick the input orientation that makes the requested
/// side of the factorization the more accurate one: with even v the
/// right-singular vectors of the input are favored, with odd v the left ones.
pub fn recommend_orientation(goal: ApproximationGoal, views: usize) -> InputSide {
    let favors_right = views % 2 == 0;
    match goal {
        ApproximationGoal::RightVectors | ApproximationGoal::NormalMatrix => {
            if favors_right {
                InputSide::Matrix
            } else {
                InputSide::Adjoint
            }
        }
        ApproximationGoal::LeftVectors => {
            if favors_right {
                InputSide::Adjoint
            } else {
                InputSide::Matrix
            }
        }
    }
}

/// Right-hand side of the half-power average spectral error bound, evaluated
/// from the exact singular values of A.
pub fn half_power_bound(singular_values: &[f64], p: usize, l: usize, q: usize) -> f64 {
    assert!(p >= 2 && l >= 2, "bound needs p >= 2 and l >= 2");
    assert!(q >= 1, "bound needs q >= 1");
    let lam_p1 = singular_values.get(p).copied().unwrap_or(0.0);
    let tail: f64 = singular_values[p..]
        .iter()
        .map(|s| s.powi(4 * q as i32))
        .sum();
    let e = std::f64::consts::E;
    let first = (1.0 + (p as f64 / (l as f64 - 1.0)).sqrt()) * lam_p1.powi(2 * q as i32);
    let second = e * ((p + l) as f64).sqrt() / l as f64 * tail.sqrt();
    (first + second).powf(1.0 / (2.0 * q as f64))
}

#[derive(Clone, Debug)]
pub struct HalfPowerBoundReport {
    pub empirical_mean: f64,
    pub bound: f64,
    pub pass: bool,
    pub per_trial: Vec<f64>,
}

/// Monte-Carlo check of the half-power bound: mean of ||A - A Q_r Q_r^T||
/// over trials against the closed-form right-hand side.
///
/// `singular_values` must be the exact spectrum of `a`. Report only; nothing
/// is asserted per trial.
pub fn check_half_power_bound(
    a: &dyn LinearOperator,
    singular_values: &[f64],
    p: usize,
    l: usize,
    q: usize,
    trials: usize,
    seed: u64,
) -> Result<HalfPowerBoundReport> {
    if p < 2 || l < 2 {
        return Err(Error::arg("half-power bound needs p >= 2 and l >= 2"));
    }
    if q < 1 {
        return Err(Error::arg("half-power bound needs q >= 1"));
    }
    if p + l > a.n_rows().min(a.n_cols()) {
        return Err(Error::arg("p + l exceeds min dimension"));
    }
    let mut per_trial = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = RngHandle::new(seed.wrapping_add(t as u64));
        // v = 2q views of A build a basis for the range of (A^T A)^q Omega.
        let q_r = qr_qc(a, p, l, 2 * q, &mut rng)?;
        let res = CorangeResidualOp { a, q_r: &q_r };
        per_trial.push(operator_spectral_norm(&res, seed.wrapping_add(0x9e37 + t as u64)));
    }
    let empirical_mean = per_trial.iter().sum::<f64>() / trials.max(1) as f64;
    let bound = half_power_bound(singular_values, p, l, q);
    Ok(HalfPowerBoundReport {
        empirical_mean,
        bound,
        pass: empirical_mean <= bound,
        per_trial,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct HalfPowerInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Deterministic inequality ||A (I - QQ^T)||^{2q} <= ||(A^T A)^q (I - QQ^T)||,
/// evaluated densely for a given orthonormal Q_r.
pub fn check_half_power_inequality(
    a: &Mat,
    q_r: &Mat,
    q: usize,
) -> Result<HalfPowerInequality> {
    if q < 1 {
        return Err(Error::arg("half-power inequality needs q >= 1"));
    }
    if q_r.nrows() != a.ncols() {
        return Err(Error::dim("Q_r must have A's column count rows"));
    }
    let defect = frob(&(q_r.transpose() * q_r - Mat::identity(q_r.ncols(), q_r.ncols())));
    if defect > 1e-8 {
        return Err(Error::arg(format!("Q_r not orthonormal, defect {defect:.3e}")));
    }
    let proj = |m: &Mat| -> Mat { m - &(m * q_r) * q_r.transpose() };
    let lhs_base = crate::dense::spectral_norm_dense(&proj(a))?;
    let lhs = lhs_base.powi(2 * q as i32);

    let ata = a.transpose() * a;
    let mut power = ata.clone();
    for _ in 1..q {
        power = &power * &ata;
    }
    let rhs = crate::dense::spectral_norm_dense(&proj(&power))?;
    Ok(HalfPowerInequality {
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-12),
    })
}
