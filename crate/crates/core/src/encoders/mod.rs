//! Node-embedding encoders: stacked GCN, GraphSAGE or GAT layers mapping the
//! encoded feature matrix to 128-dimensional segment embeddings.
//!
//! Parameters live in a caller-owned [`ParamStore`]; an [`Encoder`] only keeps
//! handles into it, so one store can hold an encoder together with whatever
//! head is trained on top of it.

mod activation;
pub mod gat;
pub mod gcn;
pub mod sage;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use activation::{leaky_relu, Activation, ATTENTION_LEAKY_SLOPE};
pub use gat::{attention_entries, gat_layer_backward, gat_layer_forward, GatCache, HeadCache, HeadParams};
pub use gcn::{gcn_layer_backward, gcn_layer_forward, GcnCache};
pub use sage::{sage_layer_backward, sage_layer_forward, sage_layer_forward_with, sample_mean_operator, SageCache};

use crate::numeric::{DenseMatrix, NumericError, ParamId, ParamStore, SparseAdjacency};
use crate::scalar::Scalar;

/// Width of every segment embedding.
pub const EMBEDDING_DIM: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gcn,
    Sage,
    Gat,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 3] = [EncoderKind::Gcn, EncoderKind::Sage, EncoderKind::Gat];

    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Gcn => "gcn",
            EncoderKind::Sage => "sage",
            EncoderKind::Gat => "gat",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(EncoderKind::Gcn),
            "sage" | "graphsage" | "gs" => Ok(EncoderKind::Sage),
            "gat" => Ok(EncoderKind::Gat),
            other => Err(format!("unknown encoder `{other}` (expected gcn, sage or gat)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub num_layers: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    /// Activation between layers; the last layer is always linear.
    pub activation: Activation,
    /// Heads on hidden GAT layers; the output layer uses a single head.
    pub gat_heads: usize,
    /// Per-layer GraphSAGE sample sizes used in sampled forward passes.
    pub sage_fanout: Vec<usize>,
    pub seed: u64,
}

impl EncoderConfig {
    pub fn new(kind: EncoderKind, num_layers: usize, input_dim: usize) -> Self {
        Self {
            kind,
            num_layers,
            input_dim,
            hidden_dim: 128,
            out_dim: EMBEDDING_DIM,
            activation: Activation::Relu,
            gat_heads: 4,
            sage_fanout: vec![25, 10, 10],
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: String| Err(EncoderError::InvalidConfig(m));
        if !(1..=3).contains(&self.num_layers) {
            return bad(format!("num_layers must be 1, 2 or 3, got {}", self.num_layers));
        }
        if self.out_dim != EMBEDDING_DIM {
            return bad(format!("out_dim must be {EMBEDDING_DIM}, got {}", self.out_dim));
        }
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return bad("input_dim and hidden_dim must be positive".into());
        }
        if self.kind == EncoderKind::Gat {
            if self.gat_heads == 0 {
                return bad("gat_heads must be positive".into());
            }
            if self.num_layers > 1 && self.hidden_dim % self.gat_heads != 0 {
                return bad(format!("hidden_dim {} not divisible by {} heads", self.hidden_dim, self.gat_heads));
            }
        }
        if self.kind == EncoderKind::Sage && self.sage_fanout.iter().any(|&k| k == 0) {
            return bad("sage fanout entries must be >= 1".into());
        }
        Ok(())
    }

    fn fanout(&self, layer: usize) -> Option<usize> {
        self.sage_fanout.get(layer).or(self.sage_fanout.last()).copied()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Sparse operators derived once per graph.
#[derive(Debug, Clone)]
pub struct GraphOperators<T> {
    /// Plain 0/1 adjacency without self-loops (GraphSAGE neighborhoods).
    pub adjacency: SparseAdjacency<T>,
    /// `D̃^{-1/2}(A + I)D̃^{-1/2}` (GCN).
    pub gcn: SparseAdjacency<T>,
    /// `A + I` pattern (GAT attention support).
    pub attention_support: SparseAdjacency<T>,
}

impl<T: Scalar> GraphOperators<T> {
    pub fn new(adjacency: &SparseAdjacency<f64>) -> Self {
        let adjacency: SparseAdjacency<T> = adjacency.cast();
        Self { gcn: adjacency.gcn_normalized(), attention_support: adjacency.with_self_loops(), adjacency }
    }

    pub fn n(&self) -> usize {
        self.adjacency.n()
    }
}

/// How GraphSAGE layers pick neighbors in a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighborhood {
    Full,
    Sampled { seed: u64 },
}

#[derive(Debug, Clone)]
enum Layer {
    Gcn { weight: ParamId, activation: Activation },
    Sage { weight: ParamId, activation: Activation, fanout: Option<usize> },
    Gat { heads: Vec<(ParamId, ParamId)>, activation: Activation },
}

#[derive(Debug, Clone)]
enum LayerCache<T> {
    Gcn(GcnCache<T>),
    Sage(SageCache<T>),
    Gat(GatCache<T>),
}

/// Activations saved by [`Encoder::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    inputs: Vec<DenseMatrix<T>>,
    layers: Vec<LayerCache<T>>,
}

/// Glorot-uniform matrix with limit `√(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Scalar>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> DenseMatrix<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| T::cast_from(rng.gen_range(-limit..limit)))
}

#[derive(Debug, Clone)]
pub struct Encoder {
    config: EncoderConfig,
    layers: Vec<Layer>,
}

impl Encoder {
    /// Validates `config` and registers freshly initialized parameters in `store`
    /// under names prefixed with `prefix`.
    pub fn new<T: Scalar>(config: EncoderConfig, store: &mut ParamStore<T>, prefix: &str) -> Result<Self, EncoderError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers = Vec::with_capacity(config.num_layers);
        let mut in_dim = config.input_dim;
        for l in 0..config.num_layers {
            let last = l + 1 == config.num_layers;
            let out_dim = if last { config.out_dim } else { config.hidden_dim };
            let activation = if last { Activation::Identity } else { config.activation };
            let layer = match config.kind {
                EncoderKind::Gcn => {
                    let w = glorot_uniform(in_dim, out_dim, in_dim, out_dim, &mut rng);
                    Layer::Gcn { weight: store.register(format!("{prefix}layer{l}.weight"), w), activation }
                }
                EncoderKind::Sage => {
                    let w = glorot_uniform(2 * in_dim, out_dim, 2 * in_dim, out_dim, &mut rng);
                    Layer::Sage {
                        weight: store.register(format!("{prefix}layer{l}.weight"), w),
                        activation,
                        fanout: config.fanout(l),
                    }
                }
                EncoderKind::Gat => {
                    let k = if last { 1 } else { config.gat_heads };
                    let f = out_dim / k;
                    let heads = (0..k)
                        .map(|h| {
                            let w = glorot_uniform(in_dim, f, in_dim, f, &mut rng);
                            let a = glorot_uniform(1, 2 * f, 2 * f, 1, &mut rng);
                            (
                                store.register(format!("{prefix}layer{l}.head{h}.weight"), w),
                                store.register(format!("{prefix}layer{l}.head{h}.attention"), a),
                            )
                        })
                        .collect();
                    Layer::Gat { heads, activation }
                }
            };
            layers.push(layer);
            in_dim = out_dim;
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// Every parameter handle owned by this encoder, in registration order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::Gcn { weight, .. } | Layer::Sage { weight, .. } => vec![*weight],
                Layer::Gat { heads, .. } => heads.iter().flat_map(|&(w, a)| [w, a]).collect(),
            })
            .collect()
    }

    pub fn forward<T: Scalar>(
        &self,
        ops: &GraphOperators<T>,
        x: &DenseMatrix<T>,
        store: &ParamStore<T>,
        mode: Neighborhood,
    ) -> Result<(DenseMatrix<T>, EncoderCache<T>), EncoderError> {
        if x.cols() != self.config.input_dim || x.rows() != ops.n() {
            return Err(NumericError::ShapeMismatch { op: "encoder_forward", left: (ops.n(), self.config.input_dim), right: x.shape() }.into());
        }
        let mut cache = EncoderCache { inputs: Vec::with_capacity(self.layers.len()), layers: Vec::with_capacity(self.layers.len()) };
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let (out, lc) = match layer {
                Layer::Gcn { weight, activation } => {
                    let (o, c) = gcn_layer_forward(&ops.gcn, &h, store.value(*weight), *activation)?;
                    (o, LayerCache::Gcn(c))
                }
                Layer::Sage { weight, activation, fanout } => {
                    let (fanout, seed) = match mode {
                        Neighborhood::Full => (None, 0),
                        Neighborhood::Sampled { seed } => (*fanout, layer_seed(seed, l)),
                    };
                    let (o, c) = sage_layer_forward(&ops.adjacency, &h, store.value(*weight), fanout, seed, *activation)?;
                    (o, LayerCache::Sage(c))
                }
                Layer::Gat { heads, activation } => {
                    let hp = head_params(heads, store);
                    let (o, c) = gat_layer_forward(&ops.attention_support, &h, &hp, *activation)?;
                    (o, LayerCache::Gat(c))
                }
            };
            cache.inputs.push(h);
            cache.layers.push(lc);
            h = out;
        }
        Ok((h, cache))
    }

    /// Accumulates parameter gradients into `store` and returns the gradient
    /// with respect to the input features when `need_input_grad` is set.
    pub fn backward<T: Scalar>(
        &self,
        ops: &GraphOperators<T>,
        cache: &EncoderCache<T>,
        grad_out: &DenseMatrix<T>,
        store: &mut ParamStore<T>,
        need_input_grad: bool,
    ) -> Result<Option<DenseMatrix<T>>, EncoderError> {
        let mut grad = grad_out.clone();
        for l in (0..self.layers.len()).rev() {
            let need = need_input_grad || l > 0;
            let input = &cache.inputs[l];
            let d_in = match (&self.layers[l], &cache.layers[l]) {
                (Layer::Gcn { weight, activation }, LayerCache::Gcn(c)) => {
                    let (d_h, d_w) = gcn_layer_backward(&ops.gcn, store.value(*weight), *activation, c, &grad, need)?;
                    store.accumulate(*weight, &d_w)?;
                    d_h
                }
                (Layer::Sage { weight, activation, .. }, LayerCache::Sage(c)) => {
                    let (d_h, d_w) = sage_layer_backward(store.value(*weight), *activation, c, &grad, need)?;
                    store.accumulate(*weight, &d_w)?;
                    d_h
                }
                (Layer::Gat { heads, activation }, LayerCache::Gat(c)) => {
                    let (d_h, grads) = {
                        let hp = head_params(heads, store);
                        gat_layer_backward(&ops.attention_support, input, &hp, *activation, c, &grad, need)?
                    };
                    for (&(w, a), (d_w, d_a)) in heads.iter().zip(grads) {
                        store.accumulate(w, &d_w)?;
                        store.accumulate(a, &d_a)?;
                    }
                    d_h
                }
                _ => unreachable!("cache built by the same encoder"),
            };
            match d_in {
                Some(d) => grad = d,
                None => return Ok(None),
            }
        }
        Ok(Some(grad))
    }

    /// Full-neighborhood forward pass returning only the embeddings.
    pub fn embed<T: Scalar>(&self, ops: &GraphOperators<T>, x: &DenseMatrix<T>, store: &ParamStore<T>) -> Result<DenseMatrix<T>, EncoderError> {
        Ok(self.forward(ops, x, store, Neighborhood::Full)?.0)
    }
}

fn head_params<'a, T: Scalar>(heads: &[(ParamId, ParamId)], store: &'a ParamStore<T>) -> Vec<HeadParams<'a, T>> {
    heads.iter().map(|&(w, a)| HeadParams { weight: store.value(w), attention: store.value(a) }).collect()
}

fn layer_seed(seed: u64, layer: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(layer as u64 + 1)
}
