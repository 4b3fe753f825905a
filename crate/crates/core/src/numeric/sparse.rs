//! Compressed-sparse-row adjacency and the sparse × dense kernel behind every
//! graph layer.

use rayon::prelude::*;

use super::{DenseMatrix, NumericError};
use crate::scalar::Scalar;

/// CSR adjacency over `n` vertices. Column indices are sorted and unique within
/// each row. An unweighted adjacency stores no weight array and every stored
/// entry counts as `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency<T> {
    n: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    weights: Option<Vec<T>>,
    symmetric: bool,
}

const ROW_CHUNK: usize = 64;

impl<T: Scalar> SparseAdjacency<T> {
    /// Builds a symmetric unweighted adjacency from undirected pairs. Duplicate
    /// pairs collapse and self-pairs are dropped.
    pub fn from_undirected_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) out of range for n = {n}");
            if u == v {
                continue;
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        Self::from_lists(lists, true)
    }

    /// Builds an unweighted adjacency from per-row neighbor lists (sorted and
    /// deduplicated here).
    pub fn from_lists(mut lists: Vec<Vec<usize>>, symmetric: bool) -> Self {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for list in &mut lists {
            list.sort_unstable();
            list.dedup();
            debug_assert!(list.iter().all(|&j| j < n));
            indices.extend_from_slice(list);
            offsets.push(indices.len());
        }
        Self { n, offsets, indices, weights: None, symmetric }
    }

    /// Builds a weighted adjacency from per-row `(column, weight)` lists. Columns
    /// must be unique within a row.
    pub fn from_weighted_lists(lists: Vec<Vec<(usize, T)>>, symmetric: bool) -> Self {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for mut list in lists {
            list.sort_by_key(|&(j, _)| j);
            for (j, w) in list {
                assert!(j < n, "column {j} out of range");
                indices.push(j);
                weights.push(w);
            }
            offsets.push(indices.len());
        }
        Self { n, offsets, indices, weights: Some(weights), symmetric }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (directed) entries.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Stored weights of row `i`, or `None` for an unweighted adjacency.
    #[inline]
    pub fn row_weights(&self, i: usize) -> Option<&[T]> {
        self.weights.as_ref().map(|w| &w[self.offsets[i]..self.offsets[i + 1]])
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Iterates `(row, col, weight)` over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |i| {
            let start = self.offsets[i];
            self.neighbors(i)
                .iter()
                .enumerate()
                .map(move |(k, &j)| (i, j, self.weights.as_ref().map_or(T::one(), |w| w[start + k])))
        })
    }

    /// Checks the symmetric-pattern-and-weights property directly.
    pub fn check_symmetric(&self) -> bool {
        self.entries().all(|(i, j, w)| {
            let pos = self.neighbors(j).binary_search(&i);
            match pos {
                Ok(k) => self.row_weights(j).map_or(true, |ws| ws[k] == w),
                Err(_) => false,
            }
        })
    }

    /// Same pattern with a self-loop on every vertex (unweighted).
    pub fn with_self_loops(&self) -> Self {
        let lists = (0..self.n)
            .map(|i| {
                let mut l = self.neighbors(i).to_vec();
                l.push(i);
                l
            })
            .collect();
        Self::from_lists(lists, self.symmetric)
    }

    /// Row-normalized copy: every stored entry in row `i` gets `1 / deg(i)`.
    pub fn row_normalized(&self) -> Self {
        let lists = (0..self.n)
            .map(|i| {
                let nb = self.neighbors(i);
                let w = T::one() / T::cast_from(nb.len().max(1) as f64);
                nb.iter().map(|&j| (j, w)).collect()
            })
            .collect();
        Self::from_weighted_lists(lists, false)
    }

    /// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃_ii = Σ_j (A + I)_ij`.
    pub fn gcn_normalized(&self) -> Self {
        let tilde = self.with_self_loops();
        let deg: Vec<f64> = (0..tilde.n)
            .map(|i| match tilde.row_weights(i) {
                Some(ws) => ws.iter().map(|w| w.as_f64()).sum(),
                None => tilde.degree(i) as f64,
            })
            .collect();
        let weights = tilde.entries().map(|(i, j, w)| T::cast_from(w.as_f64() / (deg[i] * deg[j]).sqrt())).collect();
        Self { weights: Some(weights), ..tilde }
    }

    pub fn transpose(&self) -> Self {
        if self.symmetric {
            return self.clone();
        }
        let mut lists: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.n];
        for (i, j, w) in self.entries() {
            lists[j].push((i, w));
        }
        let mut out = Self::from_weighted_lists(lists, false);
        if self.weights.is_none() {
            out.weights = None;
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> SparseAdjacency<U> {
        SparseAdjacency {
            n: self.n,
            offsets: self.offsets.clone(),
            indices: self.indices.clone(),
            weights: self.weights.as_ref().map(|w| w.iter().map(|v| U::cast_from(v.as_f64())).collect()),
            symmetric: self.symmetric,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for (i, j, w) in self.entries() {
            m[(i, j)] = w;
        }
        m
    }

    /// Sparse × dense product `self · h`. Each output row is reduced in a fixed
    /// order, so results do not depend on the thread count.
    pub fn spmm(&self, h: &DenseMatrix<T>) -> Result<DenseMatrix<T>, NumericError> {
        if h.rows() != self.n {
            return Err(NumericError::ShapeMismatch { op: "spmm", left: (self.n, self.n), right: h.shape() });
        }
        let m = h.cols();
        let mut out = DenseMatrix::zeros(self.n, m);
        if m == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(m * ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                for (r, out_row) in block.chunks_mut(m).enumerate() {
                    let i = chunk * ROW_CHUNK + r;
                    let weights = self.row_weights(i);
                    for (k, &j) in self.neighbors(i).iter().enumerate() {
                        let w = weights.map_or(T::one(), |ws| ws[k]);
                        for (o, &v) in out_row.iter_mut().zip(h.row(j)) {
                            *o += w * v;
                        }
                    }
                }
            });
        Ok(out)
    }

    /// `selfᵀ · h`.
    pub fn spmm_transposed(&self, h: &DenseMatrix<T>) -> Result<DenseMatrix<T>, NumericError> {
        if self.symmetric {
            self.spmm(h)
        } else {
            self.transpose().spmm(h)
        }
    }
}
