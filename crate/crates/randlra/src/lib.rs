//! Randomized low-rank matrix approximation for any budget of matrix views.
//!
//! The crate covers one family of methods end to end:
//!
//! - generalized randomized subspace iteration producing an approximate
//!   rank-p TSVD with any number of views v >= 2 ([`subspace`]);
//! - Nystrom (prolonged) and pinched sketches for normal matrices J^T J
//!   ([`normal`]);
//! - single-pass (1-view) sketching with flexible truncation, adaptive
//!   minimum-variance post-processing, extended SRFT sketches and row
//!   streaming ([`one_view`]);
//! - generalized block Krylov iteration, including a pass-efficient
//!   row-streamed variant ([`block_krylov`]);
//! - truncated Levenberg-Marquardt model updates built on those
//!   factorizations ([`lm`]);
//! - synthetic test matrices, error metrics and a reproducible experiment
//!   runner ([`testbed`]).
//!
//! Everything is seeded: any output is a pure function of the seed and the
//! arguments. Matrices are dense column-major f64 ([`Mat`]); algorithms only
//! touch the input through the [`LinearOperator`] trait, so matrix-free
//! operators work throughout.

pub mod block_krylov;
pub mod dense;
pub mod error;
pub mod lm;
pub mod market;
pub mod normal;
pub mod norms;
pub mod one_view;
pub mod operator;
pub mod rng;
pub mod srft;
pub mod subspace;
pub mod testbed;
pub mod types;

pub use dense::{Mat, Vect};
pub use error::{Error, Result};
pub use operator::LinearOperator;
pub use rng::RngHandle;
pub use types::{EvdPair, SvdTriple};

// Book chapters double as doctests so the narrative stays in sync with the
// code. See book/src/.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(SubspaceIteration, "../../../book/src/subspace-iteration.md");
    chapter!(NormalMatrices, "../../../book/src/normal-matrices.md");
    chapter!(OneView, "../../../book/src/one-view.md");
    chapter!(BlockKrylov, "../../../book/src/block-krylov.md");
    chapter!(LmUpdates, "../../../book/src/lm-updates.md");
    chapter!(Testbed, "../../../book/src/testbed.md");
}
