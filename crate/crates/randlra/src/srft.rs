//! Subsampled randomized Fourier transform sampling matrices.
//!
//! Phi = D F P with D a Rademacher sign diagonal, F the orthonormal DCT-II
//! matrix (real input) and P a without-replacement column subsample of the
//! identity. At desk scale the columns are materialized once and products use
//! plain dense multiplication.

use std::f64::consts::PI;

use crate::dense::Mat;
use crate::error::{Error, Result};
use crate::rng::RngHandle;

pub struct Srft {
    n: usize,
    s: usize,
    signs: Vec<f64>,
    cols: Vec<usize>,
    phi: Mat,
}

/// Orthonormal DCT-II basis vector `freq` of length n, evaluated at all
/// sample positions.
fn dct_column(n: usize, freq: usize) -> Vec<f64> {
    let scale = if freq == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    };
    (0..n)
        .map(|a| scale * (PI * (2.0 * a as f64 + 1.0) * freq as f64 / (2.0 * n as f64)).cos())
        .collect()
}

impl Srft {
    /// Draw an n-by-s SRFT. Requires 1 <= s <= n.
    pub fn draw(rng: &mut RngHandle, n: usize, s: usize) -> Result<Srft> {
        if s == 0 || s > n {
            return Err(Error::arg(format!("srft needs 1 <= s <= n, got s={s}, n={n}")));
        }
        let signs = rng.rademacher(n);
        let cols = rng.sample_without_replacement(n, s)?;
        Ok(Srft::assemble(n, s, signs, cols))
    }

    /// Deterministic construction, mainly for oracles: explicit signs and
    /// column choices.
    pub fn with_parts(n: usize, signs: Vec<f64>, cols: Vec<usize>) -> Result<Srft> {
        if signs.len() != n {
            return Err(Error::arg("srft sign count"));
        }
        if cols.iter().any(|&c| c >= n) {
            return Err(Error::arg("srft column index out of range"));
        }
        let s = cols.len();
        if s == 0 || s > n {
            return Err(Error::arg("srft column count"));
        }
        Ok(Srft::assemble(n, s, signs, cols))
    }

    fn assemble(n: usize, s: usize, signs: Vec<f64>, cols: Vec<usize>) -> Srft {
        let mut phi = Mat::zeros(n, s);
        for (j, &freq) in cols.iter().enumerate() {
            let col = dct_column(n, freq);
            for a in 0..n {
                phi[(a, j)] = signs[a] * col[a];
            }
        }
        Srft {
            n,
            s,
            signs,
            cols,
            phi,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    /// Dense n-by-s representation of Phi.
    pub fn materialize(&self) -> Mat {
        self.phi.clone()
    }

    /// M Phi for an (k x n) input.
    pub fn apply_right(&self, m: &Mat) -> Mat {
        assert_eq!(m.ncols(), self.n, "srft apply_right shape");
        m * &self.phi
    }

    /// Phi^T M for an (n x k) input.
    pub fn apply_adjoint_left(&self, m: &Mat) -> Mat {
        assert_eq!(m.nrows(), self.n, "srft apply_adjoint_left shape");
        self.phi.transpose() * m
    }
}
