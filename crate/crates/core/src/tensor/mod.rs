//! Dense matrix and order-3 tensor algebra: thin SVD, mode-n unfolding and
//! folding, n-mode products, and truncated HOSVD with its error bound.

mod hosvd;
mod matrix;
mod svd;
mod tensor3;

pub use hosvd::{hosvd, reconstruct, truncation_error_bound, HosvdDecomposition};
pub use matrix::{dot, norm, Matrix};
pub use svd::{svd, SvdResult, MAX_SWEEPS};
pub use tensor3::{fold, mode_product, unfold, Mode, Tensor3};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimensions must be positive, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("tensor dimensions must be positive, got {0:?}")]
    EmptyDims([usize; 3]),
    #[error("expected {expected} values, got {actual}")]
    DataLength { expected: usize, actual: usize },
    #[error("non-finite entry at flat index {index}")]
    NonFinite { index: usize },
    #[error("rows have unequal lengths")]
    RaggedRows,
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid mode {0}; expected 1, 2 or 3")]
    InvalidMode(usize),
    #[error("rank {rank} for mode {mode} must lie in 1..={dim}")]
    InvalidRank {
        mode: usize,
        rank: usize,
        dim: usize,
    },
    #[error("svd did not converge within {sweeps} sweeps on a {rows}x{cols} matrix")]
    NoConvergence {
        sweeps: usize,
        rows: usize,
        cols: usize,
    },
}
