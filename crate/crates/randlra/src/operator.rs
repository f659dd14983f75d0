//! Matrix-free operator abstraction.
//!
//! All algorithms consume a [`LinearOperator`], which exposes the matrix only
//! through block products A X and A^T Y. Dense matrices, diagonal matrices
//! and low-rank triples implement it; [`CountingOp`] wraps any operator to
//! audit how often (and how wide) it is viewed.

use std::cell::Cell;

use crate::dense::Mat;
use crate::types::SvdTriple;

pub trait LinearOperator {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;

    /// A X for an (n_cols x k) block; panics on nonconforming shapes.
    fn apply(&self, x: &Mat) -> Mat;

    /// A^T Y for an (n_rows x k) block.
    fn apply_adjoint(&self, y: &Mat) -> Mat;
}

impl LinearOperator for Mat {
    fn n_rows(&self) -> usize {
        self.nrows()
    }

    fn n_cols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &Mat) -> Mat {
        self * x
    }

    fn apply_adjoint(&self, y: &Mat) -> Mat {
        self.transpose() * y
    }
}

/// Square diagonal operator with a known spectrum.
#[derive(Clone, Debug)]
pub struct DiagonalOperator {
    diag: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(diag: Vec<f64>) -> Self {
        DiagonalOperator { diag }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

impl LinearOperator for DiagonalOperator {
    fn n_rows(&self) -> usize {
        self.diag.len()
    }

    fn n_cols(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &Mat) -> Mat {
        assert_eq!(x.nrows(), self.diag.len(), "diagonal apply shape");
        let mut y = x.clone();
        for c in 0..y.ncols() {
            for (i, d) in self.diag.iter().enumerate() {
                y[(i, c)] *= d;
            }
        }
        y
    }

    fn apply_adjoint(&self, y: &Mat) -> Mat {
        self.apply(y)
    }
}

/// View of an operator's adjoint as an operator in its own right.
pub struct AdjointOp<'a> {
    inner: &'a dyn LinearOperator,
}

impl<'a> AdjointOp<'a> {
    pub fn new(inner: &'a dyn LinearOperator) -> Self {
        AdjointOp { inner }
    }
}

impl LinearOperator for AdjointOp<'_> {
    fn n_rows(&self) -> usize {
        self.inner.n_cols()
    }

    fn n_cols(&self) -> usize {
        self.inner.n_rows()
    }

    fn apply(&self, x: &Mat) -> Mat {
        self.inner.apply_adjoint(x)
    }

    fn apply_adjoint(&self, y: &Mat) -> Mat {
        self.inner.apply(y)
    }
}

impl LinearOperator for SvdTriple {
    fn n_rows(&self) -> usize {
        self.u.nrows()
    }

    fn n_cols(&self) -> usize {
        self.v.nrows()
    }

    fn apply(&self, x: &Mat) -> Mat {
        SvdTriple::apply(self, x)
    }

    fn apply_adjoint(&self, y: &Mat) -> Mat {
        SvdTriple::apply_adjoint(self, y)
    }
}

/// Counting wrapper used for view and multiplication-cost accounting.
pub struct CountingOp<'a> {
    inner: &'a dyn LinearOperator,
    applies: Cell<usize>,
    adjoint_applies: Cell<usize>,
    vector_products: Cell<usize>,
}

impl<'a> CountingOp<'a> {
    pub fn new(inner: &'a dyn LinearOperator) -> Self {
        CountingOp {
            inner,
            applies: Cell::new(0),
            adjoint_applies: Cell::new(0),
            vector_products: Cell::new(0),
        }
    }

    /// Number of A-side block products.
    pub fn applies(&self) -> usize {
        self.applies.get()
    }

    /// Number of adjoint-side block products.
    pub fn adjoint_applies(&self) -> usize {
        self.adjoint_applies.get()
    }

    /// Total views: every block product counts once, either side.
    pub fn views(&self) -> usize {
        self.applies.get() + self.adjoint_applies.get()
    }

    /// Total operator-vector products (sum of block widths).
    pub fn vector_products(&self) -> usize {
        self.vector_products.get()
    }
}

impl LinearOperator for CountingOp<'_> {
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    fn apply(&self, x: &Mat) -> Mat {
        self.applies.set(self.applies.get() + 1);
        self.vector_products.set(self.vector_products.get() + x.ncols());
        self.inner.apply(x)
    }

    fn apply_adjoint(&self, y: &Mat) -> Mat {
        self.adjoint_applies.set(self.adjoint_applies.get() + 1);
        self.vector_products.set(self.vector_products.get() + y.ncols());
        self.inner.apply_adjoint(y)
    }
}

/// Max adjoint-consistency defect |<A X, Y> - <X, A^T Y>| over random probes,
/// normalized by ||X||_F ||Y||_F ||A||_F.
pub fn adjoint_consistency_defect(
    op: &dyn LinearOperator,
    frob_norm_a: f64,
    probes: usize,
    rng: &mut crate::rng::RngHandle,
) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let x = rng.gaussian_matrix(op.n_cols(), 2).unwrap();
        let y = rng.gaussian_matrix(op.n_rows(), 2).unwrap();
        let ax = op.apply(&x);
        let aty = op.apply_adjoint(&y);
        let lhs = ax.dot(&y);
        let rhs = x.dot(&aty);
        let scale = crate::dense::frob(&x) * crate::dense::frob(&y) * frob_norm_a;
        worst = worst.max((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE));
    }
    worst
}
