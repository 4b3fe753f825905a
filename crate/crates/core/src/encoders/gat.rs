//! Multi-head graph attention.
//!
//! For head `k` with projection `W_k` and attention vector `a_k = [a_src ‖ a_dst]`:
//!
//! ```text
//! P       = H W_k
//! e_ij    = LeakyReLU(a_src · P_i + a_dst · P_j)        j ∈ N(i)
//! α_ij    = exp(e_ij) / Σ_{l ∈ N(i)} exp(e_il)
//! out_i^k = σ(Σ_j α_ij P_j)
//! ```
//!
//! Head outputs are concatenated column-wise. `N(i)` is taken from the support
//! adjacency passed in, which the encoder builds with self-loops.

use super::activation::{leaky_relu, Activation, ATTENTION_LEAKY_SLOPE};
use crate::numeric::{dot, DenseMatrix, NumericError, SparseAdjacency};
use crate::scalar::Scalar;

/// Parameters of one attention head: `weight` is `in × f`, `attention` is `1 × 2f`.
#[derive(Debug, Clone, Copy)]
pub struct HeadParams<'a, T> {
    pub weight: &'a DenseMatrix<T>,
    pub attention: &'a DenseMatrix<T>,
}

#[derive(Debug, Clone)]
pub struct HeadCache<T> {
    pub projected: DenseMatrix<T>,
    /// Pre-LeakyReLU logits, aligned with the support's CSR entries.
    pub raw_logits: Vec<T>,
    /// Attention coefficients, aligned with the support's CSR entries.
    pub alpha: Vec<T>,
    pub pre_activation: DenseMatrix<T>,
}

#[derive(Debug, Clone)]
pub struct GatCache<T> {
    pub heads: Vec<HeadCache<T>>,
}

fn head_forward<T: Scalar>(
    support: &SparseAdjacency<T>,
    h: &DenseMatrix<T>,
    head: HeadParams<'_, T>,
) -> Result<HeadCache<T>, NumericError> {
    let f = head.weight.cols();
    if head.attention.shape() != (1, 2 * f) {
        return Err(NumericError::ShapeMismatch { op: "gat attention", left: (1, 2 * f), right: head.attention.shape() });
    }
    let projected = h.matmul(head.weight)?;
    let (a_src, a_dst) = head.attention.as_slice().split_at(f);
    let n = h.rows();
    let src: Vec<T> = (0..n).map(|i| dot(projected.row(i), a_src)).collect();
    let dst: Vec<T> = (0..n).map(|i| dot(projected.row(i), a_dst)).collect();
    let slope = T::cast_from(ATTENTION_LEAKY_SLOPE);

    let mut raw_logits = Vec::with_capacity(support.nnz());
    let mut alpha = Vec::with_capacity(support.nnz());
    let mut pre_activation = DenseMatrix::zeros(n, f);
    for i in 0..n {
        let nb = support.neighbors(i);
        let start = raw_logits.len();
        let mut max_e = T::neg_infinity();
        for &j in nb {
            let u = src[i] + dst[j];
            raw_logits.push(u);
            max_e = max_e.max(leaky_relu(u, slope));
        }
        let mut denom = T::zero();
        for k in 0..nb.len() {
            let e = (leaky_relu(raw_logits[start + k], slope) - max_e).exp();
            alpha.push(e);
            denom += e;
        }
        let out_row = pre_activation.row_mut(i);
        for (k, &j) in nb.iter().enumerate() {
            let a = alpha[start + k] / denom;
            alpha[start + k] = a;
            for (o, &p) in out_row.iter_mut().zip(projected.row(j)) {
                *o += a * p;
            }
        }
    }
    Ok(HeadCache { projected, raw_logits, alpha, pre_activation })
}

/// Forward pass over all heads; output width is `Σ_k f_k`.
pub fn gat_layer_forward<T: Scalar>(
    support: &SparseAdjacency<T>,
    h: &DenseMatrix<T>,
    heads: &[HeadParams<'_, T>],
    act: Activation,
) -> Result<(DenseMatrix<T>, GatCache<T>), NumericError> {
    if support.n() != h.rows() {
        return Err(NumericError::ShapeMismatch { op: "gat_layer_forward", left: (support.n(), support.n()), right: h.shape() });
    }
    let mut caches = Vec::with_capacity(heads.len());
    let mut out: Option<DenseMatrix<T>> = None;
    for head in heads {
        if head.weight.rows() != h.cols() {
            return Err(NumericError::ShapeMismatch { op: "gat_layer_forward", left: h.shape(), right: head.weight.shape() });
        }
        let cache = head_forward(support, h, *head)?;
        let activated = act.forward(&cache.pre_activation);
        out = Some(match out {
            None => activated,
            Some(prev) => prev.hconcat(&activated)?,
        });
        caches.push(cache);
    }
    let out = out.unwrap_or_else(|| DenseMatrix::zeros(h.rows(), 0));
    Ok((out, GatCache { heads: caches }))
}

/// Per-head gradients `(dW_k, da_k)`.
pub type HeadGrads<T> = (DenseMatrix<T>, DenseMatrix<T>);

/// Returns `dH` (if requested) and per-head parameter gradients.
pub fn gat_layer_backward<T: Scalar>(
    support: &SparseAdjacency<T>,
    h: &DenseMatrix<T>,
    heads: &[HeadParams<'_, T>],
    act: Activation,
    cache: &GatCache<T>,
    grad_out: &DenseMatrix<T>,
    need_input_grad: bool,
) -> Result<(Option<DenseMatrix<T>>, Vec<HeadGrads<T>>), NumericError> {
    let n = h.rows();
    let slope = T::cast_from(ATTENTION_LEAKY_SLOPE);
    let mut d_h = need_input_grad.then(|| DenseMatrix::zeros(n, h.cols()));
    let mut grads = Vec::with_capacity(heads.len());
    let mut col = 0;
    for (head, hc) in heads.iter().zip(&cache.heads) {
        let f = head.weight.cols();
        let d_out = grad_out.column_slice(col, col + f);
        col += f;
        let d_agg = act.backward(&hc.pre_activation, &d_out);
        let p = &hc.projected;
        let (a_src, a_dst) = head.attention.as_slice().split_at(f);

        let mut d_p = DenseMatrix::zeros(n, f);
        let mut d_src = vec![T::zero(); n];
        let mut d_dst = vec![T::zero(); n];
        let offsets = support.offsets();
        for i in 0..n {
            let nb = support.neighbors(i);
            let base = offsets[i];
            let g_i = d_agg.row(i);
            // dα_ij = dAgg_i · P_j, and the message path dP_j += α_ij dAgg_i.
            let mut d_alpha = Vec::with_capacity(nb.len());
            for (k, &j) in nb.iter().enumerate() {
                let a = hc.alpha[base + k];
                d_alpha.push(dot(g_i, p.row(j)));
                for (dp, &g) in d_p.row_mut(j).iter_mut().zip(g_i) {
                    *dp += a * g;
                }
            }
            let weighted: T = nb.iter().enumerate().map(|(k, _)| hc.alpha[base + k] * d_alpha[k]).sum();
            for (k, &j) in nb.iter().enumerate() {
                let a = hc.alpha[base + k];
                let d_e = a * (d_alpha[k] - weighted);
                let d_u = if hc.raw_logits[base + k] > T::zero() { d_e } else { d_e * slope };
                d_src[i] += d_u;
                d_dst[j] += d_u;
            }
        }

        let mut d_att = DenseMatrix::zeros(1, 2 * f);
        for i in 0..n {
            let p_i = p.row(i);
            let (ds, dd) = (d_src[i], d_dst[i]);
            {
                let row = d_att.as_mut_slice();
                for c in 0..f {
                    row[c] += ds * p_i[c];
                    row[f + c] += dd * p_i[c];
                }
            }
            for (c, dp) in d_p.row_mut(i).iter_mut().enumerate() {
                *dp += ds * a_src[c] + dd * a_dst[c];
            }
        }

        let d_w = h.t_matmul(&d_p)?;
        if let Some(acc) = d_h.as_mut() {
            acc.add_assign(&d_p.matmul_t(head.weight)?)?;
        }
        grads.push((d_w, d_att));
    }
    Ok((d_h, grads))
}

/// Attention coefficients of one head as `(i, j, α_ij)` triples.
pub fn attention_entries<'a, T: Scalar>(
    support: &'a SparseAdjacency<T>,
    head: &'a HeadCache<T>,
) -> impl Iterator<Item = (usize, usize, T)> + 'a {
    support.entries().zip(&head.alpha).map(|((i, j, _), &a)| (i, j, a))
}
