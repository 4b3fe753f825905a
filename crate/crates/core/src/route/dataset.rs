use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AugmentStats, RouteError};
use crate::numeric::{snapshot, DenseMatrix};

pub const TARGET_COLUMN: &str = "real_time_of_arrival_s";

/// Column layout and normalization statistics stored next to the tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteDatasetMeta {
    /// Names of the stored columns; the last one is the target.
    pub columns: Vec<String>,
    pub target_column: String,
    /// How the embedding part was produced, e.g. `dgi(gcn)+sum`.
    pub source: String,
    pub augment_stats: AugmentStats,
    /// Leading rows used for training; the rest split into validation and test.
    pub train_count: usize,
}

/// Route vectors with their travel-time targets, one row per trip.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteDataset {
    pub features: DenseMatrix<f64>,
    pub targets: Vec<f64>,
    pub feature_columns: Vec<String>,
    pub source: String,
    pub augment_stats: AugmentStats,
    pub train_count: usize,
}

/// `routes.etat` → `routes.json`.
pub fn sidecar_path(tensor_path: &Path) -> PathBuf {
    tensor_path.with_extension("json")
}

impl RouteDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    /// Writes the tensor (features with the target appended as the last
    /// column) and its JSON sidecar.
    pub fn write(&self, tensor_path: &Path) -> Result<(), RouteError> {
        let (rows, width) = self.features.shape();
        let stored = DenseMatrix::from_fn(rows, width + 1, |i, j| if j < width { self.features[(i, j)] } else { self.targets[i] });
        if let Some(dir) = tensor_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(tensor_path)?);
        snapshot::write_tensor(&mut out, &stored)?;
        out.flush()?;
        let mut columns = self.feature_columns.clone();
        columns.push(TARGET_COLUMN.to_string());
        let meta = RouteDatasetMeta {
            columns,
            target_column: TARGET_COLUMN.to_string(),
            source: self.source.clone(),
            augment_stats: self.augment_stats,
            train_count: self.train_count,
        };
        fs::write(sidecar_path(tensor_path), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }

    pub fn load(tensor_path: &Path) -> Result<Self, RouteError> {
        let meta: RouteDatasetMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(tensor_path))?)?;
        let stored: DenseMatrix<f64> = snapshot::read_tensor(&mut BufReader::new(File::open(tensor_path)?))?;
        if stored.cols() != meta.columns.len() || stored.cols() == 0 {
            return Err(RouteError::Dataset(format!(
                "tensor has {} columns, sidecar lists {}",
                stored.cols(),
                meta.columns.len()
            )));
        }
        if meta.columns.last() != Some(&meta.target_column) {
            return Err(RouteError::Dataset("target column must be last".into()));
        }
        let width = stored.cols() - 1;
        let features = stored.column_slice(0, width);
        let targets = (0..stored.rows()).map(|i| stored[(i, width)]).collect();
        let mut feature_columns = meta.columns;
        feature_columns.pop();
        Ok(Self {
            features,
            targets,
            feature_columns,
            source: meta.source,
            augment_stats: meta.augment_stats,
            train_count: meta.train_count,
        })
    }
}
