//! Unsupervised encoder training with a link-prediction objective: embeddings
//! of adjacent vertices should have a large dot product, embeddings of random
//! vertex pairs a small one.
//!
//! ```text
//! L = 1/P · (Σ_{(u,v) ∈ E⁺} softplus(−z_u·z_v) + Σ_{(u,w) ∈ E⁻} softplus(z_u·z_w))
//! ```
//!
//! with `Q` uniformly drawn negatives `w` for every positive edge `(u, v)`.
//!
//! Used for the plain (non-InfoMax) GraphSAGE configurations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dgi::{EpochRecord, TrainError};
use crate::encoders::{Encoder, EncoderConfig, EncoderError, GraphOperators, Neighborhood};
use crate::numeric::{dot, AdamState, DenseMatrix, ParamStore, SparseAdjacency};
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkPredConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Positive edges sampled per epoch.
    pub pairs_per_epoch: usize,
    /// Uniform negatives drawn per positive edge.
    pub negatives: usize,
}

impl Default for LinkPredConfig {
    fn default() -> Self {
        Self { epochs: 100, learning_rate: 0.001, seed: 0, pairs_per_epoch: 2048, negatives: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct LinkPredModel<T> {
    pub encoder: Encoder,
    pub params: ParamStore<T>,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `(anchor, other, is_positive)` pairs drawn for one epoch.
pub fn sample_pairs<T: Scalar>(
    adjacency: &SparseAdjacency<T>,
    count: usize,
    negatives: usize,
    rng: &mut impl Rng,
) -> Vec<(usize, usize, bool)> {
    let (n, nnz) = (adjacency.n(), adjacency.nnz());
    let mut pairs = Vec::with_capacity((1 + negatives) * count);
    if nnz == 0 || n < 2 {
        return pairs;
    }
    for _ in 0..count {
        let e = rng.gen_range(0..nnz);
        let u = adjacency.offsets().partition_point(|&o| o <= e) - 1;
        let v = adjacency.indices()[e];
        pairs.push((u, v, true));
        for _ in 0..negatives {
            pairs.push((u, rng.gen_range(0..n), false));
        }
    }
    pairs
}

impl<T: Scalar> LinkPredModel<T> {
    pub fn new(config: EncoderConfig) -> Result<Self, EncoderError> {
        let mut params = ParamStore::new();
        let encoder = Encoder::new(config, &mut params, "encoder.")?;
        Ok(Self { encoder, params })
    }

    pub fn embed_nodes(&self, ops: &GraphOperators<T>, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>, EncoderError> {
        self.encoder.embed(ops, x, &self.params)
    }

    /// Loss over `pairs`, optionally accumulating gradients. Returns
    /// `(loss, fraction of pairs classified correctly)`.
    pub fn evaluate(
        &mut self,
        ops: &GraphOperators<T>,
        x: &DenseMatrix<T>,
        pairs: &[(usize, usize, bool)],
        mode: Neighborhood,
        backprop: bool,
    ) -> Result<(f64, f64), TrainError> {
        let (z, cache) = self.encoder.forward(ops, x, &self.params, mode)?;
        if pairs.is_empty() {
            return Ok((0.0, 1.0));
        }
        let positives = pairs.iter().filter(|p| p.2).count().max(1);
        let norm = 1.0 / positives as f64;
        let mut loss = 0.0;
        let mut correct = 0usize;
        let mut d_z = DenseMatrix::zeros(z.rows(), z.cols());
        for &(u, v, positive) in pairs {
            let s = dot(z.row(u), z.row(v));
            let sf = s.as_f64();
            let (l, g) = if positive {
                (softplus(-sf), -(1.0 - sigmoid(sf)))
            } else {
                (softplus(sf), sigmoid(sf))
            };
            loss += l * norm;
            if (sf > 0.0) == positive {
                correct += 1;
            }
            if backprop {
                let g = T::cast_from(g * norm);
                for c in 0..z.cols() {
                    let (zu, zv) = (z[(u, c)], z[(v, c)]);
                    d_z[(u, c)] += g * zv;
                    d_z[(v, c)] += g * zu;
                }
            }
        }
        if backprop {
            self.encoder.backward(ops, &cache, &d_z, &mut self.params, false)?;
        }
        Ok((loss, correct as f64 / pairs.len() as f64))
    }
}

/// Trains with Adam on freshly sampled pairs each epoch; returns the history.
pub fn train_link_prediction<T: Scalar>(
    ops: &GraphOperators<T>,
    x: &DenseMatrix<T>,
    model: &mut LinkPredModel<T>,
    cfg: &LinkPredConfig,
) -> Result<Vec<EpochRecord>, TrainError> {
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let pairs = sample_pairs(&ops.adjacency, cfg.pairs_per_epoch, cfg.negatives, &mut rng);
        let seed = rng.gen();
        model.params.zero_grad();
        let (loss, acc) = model.evaluate(ops, x, &pairs, Neighborhood::Sampled { seed }, true)?;
        if !loss.is_finite() {
            return Err(TrainError::NaNLoss { epoch });
        }
        history.push(EpochRecord { epoch, loss, discriminator_accuracy: acc });
        adam.step(&mut model.params)?;
    }
    model.params.zero_grad();
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::EncoderKind;

    #[test]
    fn positive_pairs_are_edges() {
        let adj = SparseAdjacency::<f64>::from_undirected_edges(5, [(0, 1), (1, 2), (3, 4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = sample_pairs(&adj, 50, 3, &mut rng);
        assert_eq!(pairs.len(), 200);
        assert_eq!(pairs.iter().filter(|p| p.2).count(), 50);
        for &(u, v, pos) in &pairs {
            if pos {
                assert!(adj.contains(u, v));
            }
        }
    }

    #[test]
    fn training_reduces_loss() {
        let n = 30;
        let adj = SparseAdjacency::<f64>::from_undirected_edges(n, (0..n).map(|i| (i, (i + 1) % n)));
        let ops = GraphOperators::new(&adj);
        let x = DenseMatrix::from_fn(n, 4, |i, j| ((i * (j + 3)) % 7) as f64 / 7.0);
        let mut cfg = EncoderConfig::new(EncoderKind::Sage, 1, 4);
        cfg.seed = 3;
        let mut model = LinkPredModel::<f64>::new(cfg).unwrap();
        let hist = train_link_prediction(&ops, &x, &mut model, &LinkPredConfig { epochs: 60, learning_rate: 0.01, seed: 1, pairs_per_epoch: 64, negatives: 2 })
            .unwrap();
        let head: f64 = hist[..5].iter().map(|r| r.loss).sum::<f64>() / 5.0;
        let tail: f64 = hist[hist.len() - 5..].iter().map(|r| r.loss).sum::<f64>() / 5.0;
        assert!(tail < head, "{head} -> {tail}");
    }
}
