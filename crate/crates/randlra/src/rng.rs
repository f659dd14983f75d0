//! Seeded random sampling.
//!
//! Every randomized algorithm takes an [`RngHandle`] (or a seed that becomes
//! one), so any result is a pure function of (seed, arguments). Independent
//! streams for concurrent use come from [`RngHandle::split`], which keeps the
//! seed and selects a distinct ChaCha stream index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{Mat, Vect};
use crate::error::{Error, Result};

pub struct RngHandle {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        RngHandle {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent handle for stream `index`; the base handle is stream 0,
    /// split handles use streams 1, 2, ...
    pub fn split(&self, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index + 1);
        RngHandle {
            seed: self.seed,
            rng,
        }
    }

    /// m-by-n matrix of i.i.d. standard normal entries, filled column-major.
    pub fn gaussian_matrix(&mut self, m: usize, n: usize) -> Result<Mat> {
        if m == 0 || n == 0 {
            return Err(Error::arg(format!("gaussian_matrix needs m, n >= 1, got {m}x{n}")));
        }
        Ok(Mat::from_fn(m, n, |_, _| {
            // from_fn fills column-major for DMatrix
            StandardNormal.sample(&mut self.rng)
        }))
    }

    pub fn gaussian_vector(&mut self, n: usize) -> Vect {
        Vect::from_fn(n, |_, _| StandardNormal.sample(&mut self.rng))
    }

    /// n independent Rademacher signs (+1 or -1).
    pub fn rademacher(&mut self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| if self.rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect()
    }

    /// s distinct indices from 0..n, sampled without replacement.
    pub fn sample_without_replacement(&mut self, n: usize, s: usize) -> Result<Vec<usize>> {
        if s > n {
            return Err(Error::arg(format!("cannot sample {s} of {n} without replacement")));
        }
        // Partial Fisher-Yates over an index array.
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..s {
            let j = self.rng.random_range(i..n);
            idx.swap(i, j);
        }
        idx.truncate(s);
        Ok(idx)
    }
}
