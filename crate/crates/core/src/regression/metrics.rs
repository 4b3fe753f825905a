use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::RegressionError;

/// Contiguous train / validation / test ranges in dataset order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// The first `train_count` items train; the remainder is halved into
/// validation and test, with any odd item going to test.
pub fn split_dataset(total: usize, train_count: usize) -> Result<Split, RegressionError> {
    if train_count == 0 || train_count >= total {
        return Err(RegressionError::InsufficientData { total, train_count });
    }
    let rest = total - train_count;
    let val_end = train_count + rest / 2;
    Ok(Split { train: 0..train_count, val: train_count..val_end, test: val_end..total })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    /// Percent.
    pub mape: f64,
    pub count: usize,
}

/// MAE, RMSE and MAPE (percent) of `y_pred` against `y`.
pub fn compute_metrics(y: &[f64], y_pred: &[f64]) -> Result<MetricsReport, RegressionError> {
    if y.len() != y_pred.len() {
        return Err(RegressionError::LengthMismatch { targets: y.len(), predictions: y_pred.len() });
    }
    if y.is_empty() {
        return Err(RegressionError::InsufficientData { total: 0, train_count: 0 });
    }
    if let Some(index) = y.iter().position(|&v| v == 0.0) {
        return Err(RegressionError::ZeroTarget { index });
    }
    let n = y.len() as f64;
    let (mut abs, mut sq, mut pct) = (0.0, 0.0, 0.0);
    for (&t, &p) in y.iter().zip(y_pred) {
        let e = t - p;
        abs += e.abs();
        sq += e * e;
        pct += (e / t).abs();
    }
    Ok(MetricsReport { mae: abs / n, rmse: (sq / n).sqrt(), mape: 100.0 * pct / n, count: y.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Counts of signed errors `y_pred − y` in bins `[k·w, (k+1)·w)`, covering the
/// smallest to the largest error with no gaps.
pub fn error_histogram(y: &[f64], y_pred: &[f64], bin_width: f64) -> Vec<HistogramBin> {
    assert!(bin_width > 0.0, "bin width must be positive");
    let keys: Vec<i64> = y.iter().zip(y_pred).map(|(&t, &p)| ((p - t) / bin_width).floor() as i64).collect();
    let (Some(&lo), Some(&hi)) = (keys.iter().min(), keys.iter().max()) else {
        return Vec::new();
    };
    let mut bins: Vec<HistogramBin> = (lo..=hi)
        .map(|k| HistogramBin { left: k as f64 * bin_width, right: (k + 1) as f64 * bin_width, count: 0 })
        .collect();
    for k in keys {
        bins[(k - lo) as usize].count += 1;
    }
    bins
}
