//! Travel-time estimation on road graphs with unsupervised segment embeddings.
//!
//! The pipeline: road segments are vertices of a [`road::RoadGraph`]; an
//! encoder (GCN, GraphSAGE or GAT) trained with Deep Graph InfoMax produces
//! 128-dimensional segment embeddings; routes are turned into vectors by
//! summing member embeddings or by reading out virtual route vertices; an MLP
//! regresses travel time from those vectors.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the precision used by the end-to-end pipeline.

pub mod dgi;
pub mod checkpoint;
pub mod encoders;
pub mod linkpred;
pub mod numeric;
pub mod pipeline;
pub mod regression;
pub mod road;
pub mod route;
pub mod synth;
pub mod scalar;

pub use scalar::{DType, Scalar};

/// Double-precision dense matrix used throughout the pipeline.
pub type Matrix = numeric::DenseMatrix<f64>;
/// Single-precision dense matrix for memory-bound storage.
pub type Matrix32 = numeric::DenseMatrix<f32>;
pub type Adjacency = numeric::SparseAdjacency<f64>;
