//! Encoder checkpoints: a directory holding `config.json` (objective, encoder
//! config, parameter names and shapes) and `params.etat` (the parameters as
//! concatenated tensor snapshots, in registration order).

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dgi::DgiModel;
use crate::encoders::{Encoder, EncoderConfig, EncoderError, GraphOperators};
use crate::linkpred::LinkPredModel;
use crate::numeric::{snapshot, DenseMatrix, NumericError, ParamStore};
use crate::scalar::Scalar;

pub const CONFIG_FILE: &str = "config.json";
pub const PARAMS_FILE: &str = "params.etat";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint file not found: {0}")]
    MissingFile(PathBuf),
    #[error("checkpoint does not match its config: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Unsupervised objective the encoder was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Dgi,
    LinkPrediction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamMeta {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub objective: Objective,
    pub encoder: EncoderConfig,
    pub dtype_bytes: u32,
    pub params: Vec<ParamMeta>,
}

/// An encoder restored from disk, ready to embed.
#[derive(Debug, Clone)]
pub struct TrainedEncoder<T> {
    pub objective: Objective,
    pub encoder: Encoder,
    pub params: ParamStore<T>,
}

impl<T: Scalar> TrainedEncoder<T> {
    pub fn embed_nodes(&self, ops: &GraphOperators<T>, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>, EncoderError> {
        self.encoder.embed(ops, x, &self.params)
    }
}

impl<T: Scalar> From<DgiModel<T>> for TrainedEncoder<T> {
    fn from(m: DgiModel<T>) -> Self {
        Self { objective: Objective::Dgi, encoder: m.encoder, params: m.params }
    }
}

impl<T: Scalar> From<LinkPredModel<T>> for TrainedEncoder<T> {
    fn from(m: LinkPredModel<T>) -> Self {
        Self { objective: Objective::LinkPrediction, encoder: m.encoder, params: m.params }
    }
}

pub fn save_checkpoint<T: Scalar>(dir: &Path, model: &TrainedEncoder<T>) -> Result<(), CheckpointError> {
    fs::create_dir_all(dir)?;
    let meta = CheckpointMeta {
        objective: model.objective,
        encoder: model.encoder.config().clone(),
        dtype_bytes: T::DTYPE.code(),
        params: model.params.iter().map(|p| ParamMeta { name: p.name.clone(), rows: p.value.rows(), cols: p.value.cols() }).collect(),
    };
    fs::write(dir.join(CONFIG_FILE), serde_json::to_string_pretty(&meta)? + "\n")?;
    let mut out = BufWriter::new(File::create(dir.join(PARAMS_FILE))?);
    for p in model.params.iter() {
        snapshot::write_tensor(&mut out, &p.value)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint_meta(dir: &Path) -> Result<CheckpointMeta, CheckpointError> {
    let path = dir.join(CONFIG_FILE);
    if !path.exists() {
        return Err(CheckpointError::MissingFile(path));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Rebuilds the model skeleton from the stored config and fills in the stored
/// parameters. Names and shapes must match exactly.
pub fn load_checkpoint<T: Scalar>(dir: &Path) -> Result<TrainedEncoder<T>, CheckpointError> {
    let meta = read_checkpoint_meta(dir)?;
    let mut model: TrainedEncoder<T> = match meta.objective {
        Objective::Dgi => DgiModel::new(meta.encoder.clone())?.into(),
        Objective::LinkPrediction => LinkPredModel::new(meta.encoder.clone())?.into(),
    };
    if model.params.len() != meta.params.len() {
        return Err(CheckpointError::Mismatch(format!(
            "config lists {} parameters, model has {}",
            meta.params.len(),
            model.params.len()
        )));
    }
    let path = dir.join(PARAMS_FILE);
    if !path.exists() {
        return Err(CheckpointError::MissingFile(path));
    }
    let mut input = BufReader::new(File::open(path)?);
    let ids: Vec<_> = model.params.ids().collect();
    for (id, pm) in ids.into_iter().zip(&meta.params) {
        let value: DenseMatrix<T> = snapshot::read_tensor(&mut input)?;
        let name = model.params.name(id);
        if name != pm.name || value.shape() != (pm.rows, pm.cols) || value.shape() != model.params.value(id).shape() {
            return Err(CheckpointError::Mismatch(format!("parameter {name} vs stored {} {:?}", pm.name, value.shape())));
        }
        *model.params.value_mut(id) = value;
    }
    Ok(model)
}
