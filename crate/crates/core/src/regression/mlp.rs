use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RegressionError;
use crate::encoders::{glorot_uniform, Activation};
use crate::numeric::{AdamState, DenseMatrix, ParamId, ParamStore};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize) -> Self {
        Self { input_dim, hidden: vec![256, 64], seed: 0 }
    }

    pub fn validate(&self) -> Result<(), RegressionError> {
        if self.input_dim == 0 || self.hidden.contains(&0) {
            return Err(RegressionError::InvalidConfig("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Affine layers with ReLU in between and a linear scalar output.
#[derive(Debug, Clone)]
pub struct Mlp {
    config: MlpConfig,
    /// `(weight in × out, bias 1 × out)` per layer.
    layers: Vec<(ParamId, ParamId)>,
}

#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    inputs: Vec<DenseMatrix<T>>,
    pre_activations: Vec<DenseMatrix<T>>,
}

impl Mlp {
    /// Registers Glorot-initialized weights and zero biases.
    pub fn new<T: Scalar>(config: MlpConfig, store: &mut ParamStore<T>, prefix: &str) -> Result<Self, RegressionError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut widths = vec![config.input_dim];
        widths.extend(&config.hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let weight = store.register(format!("{prefix}layer{l}.weight"), glorot_uniform(w[0], w[1], w[0], w[1], &mut rng));
                let bias = store.register(format!("{prefix}layer{l}.bias"), DenseMatrix::zeros(1, w[1]));
                (weight, bias)
            })
            .collect();
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            Activation::Identity
        } else {
            Activation::Relu
        }
    }

    /// Returns the `batch × 1` predictions and the cache needed by backward.
    pub fn forward<T: Scalar>(&self, x: &DenseMatrix<T>, store: &ParamStore<T>) -> Result<(DenseMatrix<T>, MlpCache<T>), RegressionError> {
        let mut cache = MlpCache { inputs: Vec::with_capacity(self.layers.len()), pre_activations: Vec::with_capacity(self.layers.len()) };
        let mut h = x.clone();
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            let mut pre = h.matmul(store.value(w))?;
            pre.add_row_broadcast(store.value(b))?;
            let out = self.activation(l).forward(&pre);
            cache.inputs.push(h);
            cache.pre_activations.push(pre);
            h = out;
        }
        Ok((h, cache))
    }

    pub fn predict<T: Scalar>(&self, x: &DenseMatrix<T>, store: &ParamStore<T>) -> Result<DenseMatrix<T>, RegressionError> {
        Ok(self.forward(x, store)?.0)
    }

    /// Accumulates parameter gradients for upstream gradient `grad_out`.
    pub fn backward<T: Scalar>(&self, cache: &MlpCache<T>, grad_out: &DenseMatrix<T>, store: &mut ParamStore<T>) -> Result<(), RegressionError> {
        let mut grad = grad_out.clone();
        for l in (0..self.layers.len()).rev() {
            let (w, b) = self.layers[l];
            let d_pre = self.activation(l).backward(&cache.pre_activations[l], &grad);
            store.accumulate(w, &cache.inputs[l].t_matmul(&d_pre)?)?;
            store.accumulate(b, &d_pre.column_sums())?;
            if l > 0 {
                grad = d_pre.matmul_t(store.value(w))?;
            }
        }
        Ok(())
    }
}

/// Per-column affine standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics; near-constant columns get `std = 1`.
    pub fn fit(x: &DenseMatrix<f64>) -> Self {
        let n = x.rows().max(1) as f64;
        let mean = x.column_means().into_vec();
        let mut var = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for (v, (&a, &m)) in var.iter_mut().zip(x.row(i).iter().zip(&mean)) {
                *v += (a - m) * (a - m);
            }
        }
        let std = var.into_iter().map(|v| if v / n > 1e-24 { (v / n).sqrt() } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn apply<T: Scalar>(&self, x: &DenseMatrix<f64>) -> DenseMatrix<T> {
        DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| T::cast_from((x[(i, j)] - self.mean[j]) / self.std[j]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without a better validation MAE.
    pub patience: Option<usize>,
}

impl Default for RegressorTrainConfig {
    fn default() -> Self {
        Self { epochs: 50, learning_rate: 1e-4, batch_size: 64, seed: 0, patience: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionEpoch {
    pub epoch: usize,
    /// Mean squared error on standardized targets.
    pub train_loss: f64,
    /// Validation MAE in seconds.
    pub val_mae: f64,
}

/// A trained MLP together with its input and target scaling.
///
/// The network sees standardized inputs and predicts the standardized target;
/// predictions are mapped back to seconds.
#[derive(Debug, Clone)]
pub struct Regressor<T> {
    pub mlp: Mlp,
    pub params: ParamStore<T>,
    pub inputs: Standardizer,
    pub target_mean: f64,
    pub target_std: f64,
}

const PREDICT_CHUNK: usize = 4096;

impl<T: Scalar> Regressor<T> {
    pub fn new(config: MlpConfig, inputs: Standardizer, target_mean: f64, target_std: f64) -> Result<Self, RegressionError> {
        let mut params = ParamStore::new();
        let mlp = Mlp::new(config, &mut params, "mlp.")?;
        Ok(Self { mlp, params, inputs, target_mean, target_std })
    }

    /// Predictions in seconds.
    pub fn predict(&self, x: &DenseMatrix<f64>) -> Result<Vec<f64>, RegressionError> {
        let mut out = Vec::with_capacity(x.rows());
        for start in (0..x.rows()).step_by(PREDICT_CHUNK) {
            let rows: Vec<usize> = (start..(start + PREDICT_CHUNK).min(x.rows())).collect();
            let z = self.mlp.predict(&self.inputs.apply::<T>(&x.select_rows(&rows)), &self.params)?;
            out.extend(z.as_slice().iter().map(|v| v.as_f64() * self.target_std + self.target_mean));
        }
        Ok(out)
    }
}

fn mean_abs_error(y: &[f64], p: &[f64]) -> f64 {
    y.iter().zip(p).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len().max(1) as f64
}

/// Minibatch MSE training with Adam. The returned regressor carries the
/// parameters of the epoch with the lowest validation MAE.
pub fn train_regressor<T: Scalar>(
    train_x: &DenseMatrix<f64>,
    train_y: &[f64],
    val_x: &DenseMatrix<f64>,
    val_y: &[f64],
    mlp: MlpConfig,
    cfg: &RegressorTrainConfig,
) -> Result<(Regressor<T>, Vec<RegressionEpoch>), RegressionError> {
    if train_x.rows() != train_y.len() || val_x.rows() != val_y.len() {
        return Err(RegressionError::LengthMismatch { targets: train_y.len(), predictions: train_x.rows() });
    }
    if train_y.is_empty() || val_y.is_empty() {
        return Err(RegressionError::InsufficientData { total: train_y.len() + val_y.len(), train_count: train_y.len() });
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate >= 0.0) {
        return Err(RegressionError::InvalidConfig("batch size must be positive and learning rate non-negative".into()));
    }
    let inputs = Standardizer::fit(train_x);
    let y_stats = Standardizer::fit(&DenseMatrix::from_vec(train_y.len(), 1, train_y.to_vec())?);
    let mut model = Regressor::<T>::new(mlp, inputs, y_stats.mean[0], y_stats.std[0])?;
    let x_std: DenseMatrix<T> = model.inputs.apply(train_x);
    let y_std: Vec<T> = train_y.iter().map(|&y| T::cast_from((y - model.target_mean) / model.target_std)).collect();

    let mut adam = AdamState::new(cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_y.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, model.params.clone());
    let mut since_best = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = x_std.select_rows(batch);
            let (pred, cache) = model.mlp.forward(&xb, &model.params)?;
            let scale = 2.0 / batch.len() as f64;
            let mut grad = DenseMatrix::zeros(batch.len(), 1);
            for (k, &i) in batch.iter().enumerate() {
                let e = (pred[(k, 0)] - y_std[i]).as_f64();
                loss_sum += e * e;
                grad[(k, 0)] = T::cast_from(scale * e);
            }
            model.params.zero_grad();
            model.mlp.backward(&cache, &grad, &mut model.params)?;
            adam.step(&mut model.params)?;
        }
        let train_loss = loss_sum / train_y.len() as f64;
        if !train_loss.is_finite() {
            return Err(RegressionError::NaNLoss { epoch });
        }
        let val_mae = mean_abs_error(val_y, &model.predict(val_x)?);
        history.push(RegressionEpoch { epoch, train_loss, val_mae });
        if val_mae < best.0 {
            best = (val_mae, model.params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    if best.0.is_finite() {
        model.params = best.1;
    }
    model.params.zero_grad();
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_predict_zero() {
        let mut store = ParamStore::<f64>::new();
        let mlp = Mlp::new(MlpConfig { input_dim: 3, hidden: vec![4], seed: 1 }, &mut store, "").unwrap();
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).fill(0.0);
        }
        let x = DenseMatrix::from_fn(5, 3, |i, j| (i + j) as f64);
        assert!(mlp.predict(&x, &store).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer_hand_values() {
        let mut store = ParamStore::<f64>::new();
        let mlp = Mlp::new(MlpConfig { input_dim: 2, hidden: vec![], seed: 1 }, &mut store, "").unwrap();
        let (w, b) = mlp.layers()[0];
        *store.value_mut(w) = DenseMatrix::from_rows(&[vec![2.0], vec![-1.0]]);
        *store.value_mut(b) = DenseMatrix::from_rows(&[vec![0.5]]);
        let x = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![3.0, 4.0]]);
        assert_eq!(mlp.predict(&x, &store).unwrap().as_slice(), &[1.5, 2.5]);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let x = DenseMatrix::from_fn(20, 2, |i, j| (i * (j + 1)) as f64);
        let y: Vec<f64> = (0..20).map(|i| 10.0 + i as f64).collect();
        let cfg = MlpConfig { input_dim: 2, hidden: vec![8], seed: 4 };
        let untrained = Regressor::<f64>::new(cfg.clone(), Standardizer::fit(&x), 0.0, 1.0).unwrap();
        let (trained, _) = train_regressor::<f64>(&x, &y, &x, &y, cfg, &RegressorTrainConfig { learning_rate: 0.0, epochs: 3, ..Default::default() })
            .unwrap();
        for (a, b) in untrained.params.iter().zip(trained.params.iter()) {
            assert_eq!(a.value, b.value);
        }
    }
}
