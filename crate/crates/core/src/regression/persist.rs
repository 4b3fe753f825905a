//! Regressor files: `regressor.json` (architecture and scaling) plus
//! `regressor.etat` (parameters as concatenated tensor snapshots).

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MlpConfig, RegressionError, Regressor, Standardizer};
use crate::numeric::{snapshot, DenseMatrix, NumericError};
use crate::scalar::{DType, Scalar};

pub const REGRESSOR_CONFIG_FILE: &str = "regressor.json";
pub const REGRESSOR_PARAMS_FILE: &str = "regressor.etat";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RegressorMeta {
    mlp: MlpConfig,
    inputs: Standardizer,
    target_mean: f64,
    target_std: f64,
    dtype_bytes: u32,
}

fn io_err(e: std::io::Error) -> RegressionError {
    RegressionError::Numeric(NumericError::Io(e))
}

pub fn save_regressor<T: Scalar>(dir: &Path, model: &Regressor<T>) -> Result<(), RegressionError> {
    fs::create_dir_all(dir).map_err(io_err)?;
    let meta = RegressorMeta {
        mlp: model.mlp.config().clone(),
        inputs: model.inputs.clone(),
        target_mean: model.target_mean,
        target_std: model.target_std,
        dtype_bytes: T::DTYPE.code(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| RegressionError::InvalidConfig(e.to_string()))?;
    fs::write(dir.join(REGRESSOR_CONFIG_FILE), json + "\n").map_err(io_err)?;
    let mut out = BufWriter::new(File::create(dir.join(REGRESSOR_PARAMS_FILE)).map_err(io_err)?);
    for p in model.params.iter() {
        snapshot::write_tensor(&mut out, &p.value)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

/// Precision the parameters were saved in.
pub fn regressor_dtype(dir: &Path) -> Result<DType, RegressionError> {
    let json = fs::read_to_string(dir.join(REGRESSOR_CONFIG_FILE)).map_err(io_err)?;
    let meta: RegressorMeta = serde_json::from_str(&json).map_err(|e| RegressionError::InvalidConfig(e.to_string()))?;
    DType::from_code(meta.dtype_bytes).ok_or_else(|| RegressionError::InvalidConfig(format!("unknown dtype {}", meta.dtype_bytes)))
}

pub fn load_regressor<T: Scalar>(dir: &Path) -> Result<Regressor<T>, RegressionError> {
    let json = fs::read_to_string(dir.join(REGRESSOR_CONFIG_FILE)).map_err(io_err)?;
    let meta: RegressorMeta = serde_json::from_str(&json).map_err(|e| RegressionError::InvalidConfig(e.to_string()))?;
    let mut model = Regressor::<T>::new(meta.mlp, meta.inputs, meta.target_mean, meta.target_std)?;
    let mut input = BufReader::new(File::open(dir.join(REGRESSOR_PARAMS_FILE)).map_err(io_err)?);
    for id in model.params.ids().collect::<Vec<_>>() {
        let value: DenseMatrix<T> = snapshot::read_tensor(&mut input)?;
        if value.shape() != model.params.value(id).shape() {
            return Err(RegressionError::InvalidConfig(format!("stored shape {:?} for {}", value.shape(), model.params.name(id))));
        }
        *model.params.value_mut(id) = value;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let x = DenseMatrix::from_fn(6, 3, |i, j| (i as f64 - j as f64) * 0.7);
        let model = Regressor::<f64>::new(MlpConfig { input_dim: 3, hidden: vec![5, 2], seed: 3 }, Standardizer::fit(&x), 100.0, 20.0).unwrap();
        save_regressor(dir.path(), &model).unwrap();
        let back = load_regressor::<f64>(dir.path()).unwrap();
        assert_eq!(model.predict(&x).unwrap(), back.predict(&x).unwrap());
        assert_eq!(regressor_dtype(dir.path()).unwrap(), DType::F64);
    }
}
