//! Travel-time regression: an MLP head trained with MSE and Adam, the
//! train/validation/test split, and the evaluation metrics
//!
//! ```text
//! MAE  = 1/N Σ |y_i − ŷ_i|
//! RMSE = sqrt(1/N Σ (y_i − ŷ_i)²)
//! MAPE = 100/N Σ |(y_i − ŷ_i) / y_i|
//! ```

mod metrics;
mod mlp;
mod persist;

pub use metrics::*;
pub use mlp::*;
pub use persist::*;

use crate::numeric::NumericError;

#[derive(Debug, thiserror::Error)]
pub enum RegressionError {
    #[error("not enough data: {total} rows, {train_count} requested for training")]
    InsufficientData { total: usize, train_count: usize },
    #[error("{targets} targets but {predictions} predictions")]
    LengthMismatch { targets: usize, predictions: usize },
    #[error("target {index} is zero; MAPE is undefined")]
    ZeroTarget { index: usize },
    #[error("non-finite training loss at epoch {epoch}")]
    NaNLoss { epoch: usize },
    #[error("invalid regression config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}
