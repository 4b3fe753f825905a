//! GraphSAGE layer with a mean aggregator:
//! `h'_v = σ(W · [h_v ‖ mean_{u ∈ S(v)} h_u])` where `S(v)` is the full or
//! sampled neighborhood of `v`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::activation::Activation;
use crate::numeric::{DenseMatrix, NumericError, SparseAdjacency};
use crate::scalar::Scalar;

/// Row-normalized neighbor-mean operator. With `fanout = None` every neighbor
/// is used; otherwise vertices with more than `fanout` neighbors keep a
/// uniformly sampled subset of exactly `fanout` distinct ones. Vertices without
/// neighbors get an empty row, i.e. a zero aggregate.
pub fn sample_mean_operator<T: Scalar>(adjacency: &SparseAdjacency<T>, fanout: Option<usize>, seed: u64) -> SparseAdjacency<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lists = (0..adjacency.n())
        .map(|v| {
            let nb = adjacency.neighbors(v);
            let chosen: Vec<usize> = match fanout {
                Some(k) if nb.len() > k => sample(&mut rng, nb.len(), k).into_iter().map(|p| nb[p]).collect(),
                _ => nb.to_vec(),
            };
            let w = T::one() / T::cast_from(chosen.len().max(1) as f64);
            chosen.into_iter().map(|u| (u, w)).collect()
        })
        .collect();
    SparseAdjacency::from_weighted_lists(lists, false)
}

#[derive(Debug, Clone)]
pub struct SageCache<T> {
    pub mean_op: SparseAdjacency<T>,
    /// `[H ‖ M H]`.
    pub concat: DenseMatrix<T>,
    pub pre_activation: DenseMatrix<T>,
}

/// Forward pass with an explicit neighbor-mean operator (see
/// [`sample_mean_operator`]). `w` has shape `2·in × out`.
pub fn sage_layer_forward_with<T: Scalar>(
    mean_op: SparseAdjacency<T>,
    h: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
    act: Activation,
) -> Result<(DenseMatrix<T>, SageCache<T>), NumericError> {
    if w.rows() != 2 * h.cols() {
        return Err(NumericError::ShapeMismatch { op: "sage_layer_forward", left: h.shape(), right: w.shape() });
    }
    let neigh = mean_op.spmm(h)?;
    let concat = h.hconcat(&neigh)?;
    let pre_activation = concat.matmul(w)?;
    let out = act.forward(&pre_activation);
    Ok((out, SageCache { mean_op, concat, pre_activation }))
}

/// Forward pass sampling neighborhoods from `adjacency`; deterministic for a
/// given `seed`, and seed-independent when `fanout` is `None`.
pub fn sage_layer_forward<T: Scalar>(
    adjacency: &SparseAdjacency<T>,
    h: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
    fanout: Option<usize>,
    seed: u64,
    act: Activation,
) -> Result<(DenseMatrix<T>, SageCache<T>), NumericError> {
    if adjacency.n() != h.rows() {
        return Err(NumericError::ShapeMismatch { op: "sage_layer_forward", left: (adjacency.n(), adjacency.n()), right: h.shape() });
    }
    sage_layer_forward_with(sample_mean_operator(adjacency, fanout, seed), h, w, act)
}

/// Returns `(dH, dW)` given `dOut`.
pub fn sage_layer_backward<T: Scalar>(
    w: &DenseMatrix<T>,
    act: Activation,
    cache: &SageCache<T>,
    grad_out: &DenseMatrix<T>,
    need_input_grad: bool,
) -> Result<(Option<DenseMatrix<T>>, DenseMatrix<T>), NumericError> {
    let d_pre = act.backward(&cache.pre_activation, grad_out);
    let d_w = cache.concat.t_matmul(&d_pre)?;
    let d_h = if need_input_grad {
        let d_concat = d_pre.matmul_t(w)?;
        let in_dim = w.rows() / 2;
        let mut d_h = d_concat.column_slice(0, in_dim);
        let d_neigh = d_concat.column_slice(in_dim, 2 * in_dim);
        d_h.add_assign(&cache.mean_op.spmm_transposed(&d_neigh)?)?;
        Some(d_h)
    } else {
        None
    };
    Ok((d_h, d_w))
}
