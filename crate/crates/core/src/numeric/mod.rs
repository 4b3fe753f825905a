//! Numeric substrate: dense and sparse matrices, parameter storage with
//! gradients, Adam, finite-difference checking and tensor snapshots.

mod adam;
mod dense;
mod gradcheck;
mod params;
pub mod snapshot;
mod sparse;

pub use adam::AdamState;
pub use dense::{dot, DenseMatrix};
pub use gradcheck::{finite_difference_check, GradCheckConfig, GradCheckReport};
pub use params::{Param, ParamId, ParamStore};
pub use sparse::SparseAdjacency;

#[derive(Debug, thiserror::Error)]
pub enum NumericError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("non-finite gradient in parameter `{param}`")]
    NaNGradient { param: String },
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
