//! From node embeddings and trips to regression-ready route vectors.
//!
//! Two ways of embedding a route `s = (v_1, …, v_k)`:
//!
//! * sum: `z_s = Σ_i Z(v_i)` over sequence positions, so repeated vertices
//!   count once per visit;
//! * virtual node: append one vertex per distinct route, linked to the route's
//!   distinct members, train the encoder on the extended graph and read off the
//!   virtual vertex's row.

mod augment;
mod dataset;
mod extended;

pub use augment::*;
pub use dataset::*;
pub use extended::*;

use rayon::prelude::*;

use crate::numeric::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum RouteError {
    #[error("route refers to vertex {node}, but there are only {n} vertices")]
    UnknownNode { node: usize, n: usize },
    #[error("route {route} is empty")]
    EmptyRoute { route: usize },
    #[error("route was not added to the extended graph")]
    RouteNotInExtension,
    #[error("weather lookup: {0}")]
    Weather(String),
    #[error("route dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Numeric(#[from] crate::numeric::NumericError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_nodes(nodes: &[usize], n: usize) -> Result<(), RouteError> {
    match nodes.iter().find(|&&v| v >= n) {
        Some(&node) => Err(RouteError::UnknownNode { node, n }),
        None => Ok(()),
    }
}

/// Sum of embedding rows over the route's node sequence, with multiplicity.
pub fn aggregate_sum<T: Scalar>(embeddings: &DenseMatrix<T>, nodes: &[usize]) -> Result<Vec<T>, RouteError> {
    check_nodes(nodes, embeddings.rows())?;
    let mut acc = vec![T::zero(); embeddings.cols()];
    for &v in nodes {
        for (a, &z) in acc.iter_mut().zip(embeddings.row(v)) {
            *a += z;
        }
    }
    Ok(acc)
}

/// Mean of rows over the route's node sequence (the baseline's route summary).
pub fn aggregate_mean<T: Scalar>(rows: &DenseMatrix<T>, nodes: &[usize]) -> Result<Vec<T>, RouteError> {
    let mut acc = aggregate_sum(rows, nodes)?;
    if !nodes.is_empty() {
        let inv = T::one() / T::cast_from(nodes.len() as f64);
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    Ok(acc)
}

/// Applies `f` to every route in parallel and stacks the results row-wise.
pub fn aggregate_routes<T: Scalar, F>(routes: &[&[usize]], width: usize, f: F) -> Result<DenseMatrix<T>, RouteError>
where
    F: Fn(&[usize]) -> Result<Vec<T>, RouteError> + Sync,
{
    let rows: Vec<Vec<T>> = routes.par_iter().map(|r| f(r)).collect::<Result<_, _>>()?;
    let mut data = Vec::with_capacity(rows.len() * width);
    for r in rows {
        debug_assert_eq!(r.len(), width);
        data.extend(r);
    }
    Ok(DenseMatrix::from_vec(routes.len(), width, data)?)
}
