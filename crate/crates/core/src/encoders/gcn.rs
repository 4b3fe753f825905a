//! Graph convolution: `H' = σ(Â H W)` with `Â = D̃^{-1/2}(A + I)D̃^{-1/2}`.

use super::activation::Activation;
use crate::numeric::{DenseMatrix, NumericError, SparseAdjacency};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct GcnCache<T> {
    /// `Â H`, reused for the weight gradient.
    pub propagated: DenseMatrix<T>,
    pub pre_activation: DenseMatrix<T>,
}

/// Forward pass of one GCN layer. `norm_adj` must already be the normalized
/// operator returned by [`SparseAdjacency::gcn_normalized`].
pub fn gcn_layer_forward<T: Scalar>(
    norm_adj: &SparseAdjacency<T>,
    h: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
    act: Activation,
) -> Result<(DenseMatrix<T>, GcnCache<T>), NumericError> {
    if h.cols() != w.rows() {
        return Err(NumericError::ShapeMismatch { op: "gcn_layer_forward", left: h.shape(), right: w.shape() });
    }
    let propagated = norm_adj.spmm(h)?;
    let pre_activation = propagated.matmul(w)?;
    let out = act.forward(&pre_activation);
    Ok((out, GcnCache { propagated, pre_activation }))
}

/// Returns `(dH, dW)` given `dOut`.
pub fn gcn_layer_backward<T: Scalar>(
    norm_adj: &SparseAdjacency<T>,
    w: &DenseMatrix<T>,
    act: Activation,
    cache: &GcnCache<T>,
    grad_out: &DenseMatrix<T>,
    need_input_grad: bool,
) -> Result<(Option<DenseMatrix<T>>, DenseMatrix<T>), NumericError> {
    let d_pre = act.backward(&cache.pre_activation, grad_out);
    let d_w = cache.propagated.t_matmul(&d_pre)?;
    let d_h = if need_input_grad {
        let d_prop = d_pre.matmul_t(w)?;
        Some(norm_adj.spmm_transposed(&d_prop)?)
    } else {
        None
    };
    Ok((d_h, d_w))
}
