//! Deep Graph InfoMax: train an encoder without labels by teaching a bilinear
//! discriminator to tell true node embeddings from embeddings of a graph whose
//! feature rows were shuffled.
//!
//! Per epoch, with `H = Z(X)`, `H̃ = Z(shuffle(X))` over the same adjacency:
//!
//! ```text
//! T      = logistic(mean_i H_i)
//! D(d,T) = logistic(dᵀ W_D T)
//! L      = −1/(N+M) · (Σ_i log D(H_i,T) + Σ_j log(1 − D(H̃_j,T)))     N = M = n
//! ```

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{glorot_uniform, Encoder, EncoderConfig, EncoderError, GraphOperators, Neighborhood};
use crate::numeric::{dot, AdamState, DenseMatrix, NumericError, ParamId, ParamStore};
use crate::scalar::{sigmoid, Scalar};

/// Probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("non-finite loss at epoch {epoch}")]
    NaNLoss { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// Returns `x` with rows permuted by a seeded uniform permutation.
pub fn corrupt_features<T: Scalar>(x: &DenseMatrix<T>, seed: u64) -> DenseMatrix<T> {
    let mut perm: Vec<usize> = (0..x.rows()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    x.select_rows(&perm)
}

/// Graph summary `T = logistic(mean of embedding rows)`.
pub fn readout_summary<T: Scalar>(embeddings: &DenseMatrix<T>) -> Vec<T> {
    embeddings.column_means().as_slice().iter().map(|&v| sigmoid(v)).collect()
}

/// `logistic(dᵀ W_D t)`.
pub fn discriminator_score<T: Scalar>(d: &[T], t: &[T], w_d: &DenseMatrix<T>) -> T {
    let wt = w_d.matmul(&DenseMatrix::from_vec(t.len(), 1, t.to_vec()).expect("column vector")).expect("W_D is d × d");
    sigmoid(dot(d, wt.as_slice()))
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Normalized negative log-likelihood of the discriminator:
/// `−(Σ log p_i + Σ log(1 − q_j)) / (N + M)`.
pub fn dgi_loss(real_scores: &[f64], corrupt_scores: &[f64]) -> f64 {
    let total = (real_scores.len() + corrupt_scores.len()) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let pos: f64 = real_scores.iter().map(|&p| clamp_prob(p).ln()).sum();
    let neg: f64 = corrupt_scores.iter().map(|&q| (1.0 - clamp_prob(q)).ln()).sum();
    -(pos + neg) / total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgiTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Stop after this many epochs without a new best loss.
    pub patience: Option<usize>,
}

impl Default for DgiTrainConfig {
    fn default() -> Self {
        Self { epochs: 100, learning_rate: 0.001, seed: 0, patience: Some(20) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub discriminator_accuracy: f64,
}

/// Loss and real-vs-corrupt accuracy of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgiEval {
    pub loss: f64,
    pub accuracy: f64,
}

/// Encoder plus bilinear discriminator, with all parameters in one store.
#[derive(Debug, Clone)]
pub struct DgiModel<T> {
    pub encoder: Encoder,
    pub discriminator: ParamId,
    pub params: ParamStore<T>,
}

impl<T: Scalar> DgiModel<T> {
    pub fn new(config: EncoderConfig) -> Result<Self, EncoderError> {
        let mut params = ParamStore::new();
        let dim = config.out_dim;
        let seed = config.seed;
        let encoder = Encoder::new(config, &mut params, "encoder.")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD15C_0000);
        let w_d = glorot_uniform(dim, dim, dim, dim, &mut rng);
        let discriminator = params.register("discriminator.weight", w_d);
        Ok(Self { encoder, discriminator, params })
    }

    /// Single full-neighborhood pass; the inference path.
    pub fn embed_nodes(&self, ops: &GraphOperators<T>, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>, EncoderError> {
        self.encoder.embed(ops, x, &self.params)
    }

    /// Evaluates the objective for a given corruption and, when `backprop` is set,
    /// accumulates gradients into `self.params`.
    pub fn evaluate(
        &mut self,
        ops: &GraphOperators<T>,
        x: &DenseMatrix<T>,
        corruption_seed: u64,
        mode: Neighborhood,
        backprop: bool,
    ) -> Result<DgiEval, TrainError> {
        let x_corrupt = corrupt_features(x, corruption_seed);
        let (h, cache_real) = self.encoder.forward(ops, x, &self.params, mode)?;
        let (h_c, cache_corrupt) = self.encoder.forward(ops, &x_corrupt, &self.params, mode)?;
        let n = h.rows();
        let d = h.cols();
        let t = readout_summary(&h);
        let w_d = self.params.value(self.discriminator);
        let v: Vec<T> = (0..d).map(|a| dot(w_d.row(a), &t)).collect();

        let real_p: Vec<f64> = (0..n).map(|i| sigmoid(dot(h.row(i), &v)).as_f64()).collect();
        let corrupt_p: Vec<f64> = (0..n).map(|j| sigmoid(dot(h_c.row(j), &v)).as_f64()).collect();
        let loss = dgi_loss(&real_p, &corrupt_p);
        let correct = real_p.iter().filter(|&&p| p > 0.5).count() + corrupt_p.iter().filter(|&&q| q < 0.5).count();
        let accuracy = correct as f64 / (2 * n) as f64;
        if !backprop {
            return Ok(DgiEval { loss, accuracy });
        }

        // dL/dlogit for each score, zero where the clamp is active.
        let norm = 1.0 / (2 * n) as f64;
        let in_range = |p: f64| (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p);
        let g_real: Vec<T> =
            real_p.iter().map(|&p| T::cast_from(if in_range(p) { -(1.0 - p) * norm } else { 0.0 })).collect();
        let g_corrupt: Vec<T> =
            corrupt_p.iter().map(|&q| T::cast_from(if in_range(q) { q * norm } else { 0.0 })).collect();

        let mut d_h = DenseMatrix::zeros(n, d);
        let mut d_hc = DenseMatrix::zeros(n, d);
        let mut d_v = vec![T::zero(); d];
        for i in 0..n {
            let (gr, gc) = (g_real[i], g_corrupt[i]);
            for a in 0..d {
                d_h[(i, a)] = gr * v[a];
                d_hc[(i, a)] = gc * v[a];
                d_v[a] += gr * h[(i, a)] + gc * h_c[(i, a)];
            }
        }
        // v = W_D t: dW_D = d_v ⊗ t, dt = W_Dᵀ d_v.
        let mut d_wd = DenseMatrix::zeros(d, d);
        let mut d_t = vec![T::zero(); d];
        for a in 0..d {
            let wa = w_d.row(a);
            for b in 0..d {
                d_wd[(a, b)] = d_v[a] * t[b];
                d_t[b] += wa[b] * d_v[a];
            }
        }
        // T = logistic(mean rows of H)
        let inv_n = T::one() / T::cast_from(n as f64);
        let d_s: Vec<T> = (0..d).map(|b| d_t[b] * t[b] * (T::one() - t[b]) * inv_n).collect();
        for i in 0..n {
            for (dh, &ds) in d_h.row_mut(i).iter_mut().zip(&d_s) {
                *dh += ds;
            }
        }
        self.params.accumulate(self.discriminator, &d_wd)?;
        self.encoder.backward(ops, &cache_real, &d_h, &mut self.params, false)?;
        self.encoder.backward(ops, &cache_corrupt, &d_hc, &mut self.params, false)?;
        Ok(DgiEval { loss, accuracy })
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add(epoch as u64)
}

/// Full-batch DGI training with Adam. Returns the per-epoch history; the model
/// is left holding the parameters of the lowest-loss epoch.
pub fn train_dgi<T: Scalar>(
    ops: &GraphOperators<T>,
    x: &DenseMatrix<T>,
    model: &mut DgiModel<T>,
    cfg: &DgiTrainConfig,
) -> Result<Vec<EpochRecord>, TrainError> {
    if !(cfg.learning_rate >= 0.0) {
        return Err(TrainError::InvalidConfig(format!("learning rate must be >= 0, got {}", cfg.learning_rate)));
    }
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, ParamStore<T>)> = None;
    let mut since_best = 0;
    for epoch in 0..cfg.epochs {
        let seed = epoch_seed(cfg.seed, epoch);
        model.params.zero_grad();
        let eval = model.evaluate(ops, x, seed, Neighborhood::Sampled { seed }, true)?;
        if !eval.loss.is_finite() {
            return Err(TrainError::NaNLoss { epoch });
        }
        history.push(EpochRecord { epoch, loss: eval.loss, discriminator_accuracy: eval.accuracy });
        match &best {
            Some((b, _)) if eval.loss >= *b => since_best += 1,
            _ => {
                best = Some((eval.loss, model.params.clone()));
                since_best = 0;
            }
        }
        if cfg.patience.is_some_and(|p| since_best >= p) {
            break;
        }
        adam.step(&mut model.params)?;
    }
    if let Some((_, params)) = best {
        model.params.copy_values_from(&params)?;
    }
    model.params.zero_grad();
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_corruption_is_identity() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        assert_eq!(corrupt_features(&x, 9), x);
    }

    #[test]
    fn corruption_is_a_seeded_row_permutation() {
        let x = DenseMatrix::from_fn(20, 3, |i, j| (i * 10 + j) as f64);
        let a = corrupt_features(&x, 5);
        assert_eq!(a, corrupt_features(&x, 5));
        assert_ne!(a, x);
        assert_eq!(a.column_sums(), x.column_sums());
        let mut rows_a: Vec<Vec<u64>> = (0..20).map(|i| a.row(i).iter().map(|v| v.to_bits()).collect()).collect();
        let mut rows_x: Vec<Vec<u64>> = (0..20).map(|i| x.row(i).iter().map(|v| v.to_bits()).collect()).collect();
        rows_a.sort();
        rows_x.sort();
        assert_eq!(rows_a, rows_x);
    }

    #[test]
    fn zero_embeddings_give_half_summary() {
        let t = readout_summary(&DenseMatrix::<f64>::zeros(3, 128));
        assert!(t.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn discriminator_hand_values() {
        let mut e1 = vec![0.0f64; 4];
        e1[0] = 1.0;
        assert_eq!(discriminator_score(&e1, &e1, &DenseMatrix::zeros(4, 4)), 0.5);
        let s = discriminator_score(&e1, &e1, &DenseMatrix::identity(4));
        assert!((s - 0.731_058_578_630_004_9).abs() < 1e-15);
    }

    #[test]
    fn bilinear_transpose_identity() {
        let w = DenseMatrix::from_fn(3, 3, |i, j| (i as f64 - 2.0 * j as f64) * 0.3);
        let d = [0.2, -0.5, 1.0];
        let t = [0.9, 0.1, 0.4];
        let a = discriminator_score(&d, &t, &w);
        let b = discriminator_score(&t, &d, &w.transpose());
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn loss_hand_values() {
        assert!((dgi_loss(&[0.5; 3], &[0.5; 7]) - std::f64::consts::LN_2).abs() < 1e-15);
        let expected = -0.5 * (0.9f64.ln() + 0.9f64.ln());
        assert!((dgi_loss(&[0.9], &[0.1]) - expected).abs() < 1e-15);
        assert!((dgi_loss(&[0.9], &[0.1]) - 0.105_360_515_657_826_3).abs() < 1e-12);
        let perfect = dgi_loss(&[1.0 - 1e-12; 4], &[1e-12; 4]);
        assert!(perfect > 0.0 && perfect < 1e-6);
    }
}
