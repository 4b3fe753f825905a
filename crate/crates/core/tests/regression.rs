mod common;

use common::{random_matrix, rng};
use eta_graph::numeric::DenseMatrix;
use eta_graph::regression::{
    compute_metrics, error_histogram, load_regressor, save_regressor, split_dataset, train_regressor, MlpConfig,
    RegressionError, RegressorTrainConfig,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Textbook definitions, written independently of the library.
fn oracle(y: &[f64], p: &[f64]) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let mae = y.iter().zip(p).map(|(a, b)| (b - a).abs()).sum::<f64>() / n;
    let mse = y.iter().zip(p).map(|(a, b)| (b - a).powi(2)).sum::<f64>() / n;
    let mape = y.iter().zip(p).map(|(a, b)| ((a - b) / a).abs() * 100.0).sum::<f64>() / n;
    (mae, mse.sqrt(), mape)
}

#[test]
fn hand_example() {
    let m = compute_metrics(&[100.0, 200.0], &[110.0, 180.0]).unwrap();
    assert_eq!(m.mae, 15.0);
    assert_eq!(m.rmse, 250f64.sqrt());
    assert!((m.rmse - 15.811).abs() < 1e-3);
    assert_eq!(m.mape, 10.0);
    assert_eq!(m.count, 2);
}

#[test]
fn metrics_match_brute_force_on_1000_instances() {
    let mut r = rng(5);
    for _ in 0..1000 {
        let n = r.gen_range(1..200);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(10.0..3000.0)).collect();
        let p: Vec<f64> = y.iter().map(|v| v + r.gen_range(-500.0..500.0)).collect();
        let m = compute_metrics(&y, &p).unwrap();
        let (mae, rmse, mape) = oracle(&y, &p);
        assert!((m.mae - mae).abs() < 1e-10);
        assert!((m.rmse - rmse).abs() < 1e-10);
        assert!((m.mape - mape).abs() < 1e-10);
    }
}

#[test]
fn metric_errors() {
    assert!(matches!(compute_metrics(&[1.0, 2.0], &[1.0]), Err(RegressionError::LengthMismatch { .. })));
    assert!(matches!(compute_metrics(&[1.0, 0.0], &[1.0, 1.0]), Err(RegressionError::ZeroTarget { index: 1 })));
    assert!(compute_metrics(&[], &[]).is_err());
}

#[test]
fn split_sizes() {
    let s = split_dataset(20000, 16666).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (16666, 1667, 1667));
    let s = split_dataset(10, 7).unwrap();
    assert_eq!((s.train, s.val, s.test), (0..7, 7..8, 8..10));
    assert!(split_dataset(10, 10).is_err());
    assert!(split_dataset(10, 0).is_err());
}

#[test]
fn histogram_counts_every_error_once() {
    let y = [100.0, 100.0, 100.0, 100.0];
    let p = [95.0, 100.0, 129.0, 161.0];
    let bins = error_histogram(&y, &p, 30.0);
    let counts: Vec<usize> = bins.iter().map(|b| b.count).collect();
    assert_eq!(counts, vec![1, 2, 0, 1]);
    assert_eq!(bins[0].left, -30.0);
    assert_eq!(bins[3].right, 90.0);
}

proptest! {
    #[test]
    fn rmse_at_least_mae(seed in any::<u64>(), n in 1usize..100) {
        let mut r = rng(seed);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(1.0..1000.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| r.gen_range(-1000.0..2000.0)).collect();
        let m = compute_metrics(&y, &p).unwrap();
        prop_assert!(m.rmse >= m.mae - 1e-12);
        prop_assert!(m.mae >= 0.0 && m.mape >= 0.0);
    }

    #[test]
    fn metrics_are_permutation_invariant(seed in any::<u64>(), n in 1usize..100) {
        let mut r = rng(seed);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(1.0..1000.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1000.0)).collect();
        let mut idx: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut r);
        let a = compute_metrics(&y, &p).unwrap();
        let b = compute_metrics(&idx.iter().map(|&i| y[i]).collect::<Vec<_>>(), &idx.iter().map(|&i| p[i]).collect::<Vec<_>>()).unwrap();
        prop_assert!((a.mae - b.mae).abs() < 1e-9 && (a.rmse - b.rmse).abs() < 1e-9 && (a.mape - b.mape).abs() < 1e-9);
    }

    #[test]
    fn perfect_prediction_scores_zero(seed in any::<u64>(), n in 1usize..50) {
        let mut r = rng(seed);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(1.0..1000.0)).collect();
        let m = compute_metrics(&y, &y).unwrap();
        prop_assert_eq!((m.mae, m.rmse, m.mape), (0.0, 0.0, 0.0));
    }
}

const NOISE: f64 = 5.0;

/// `y = 300 + 40·x0 − 25·x1 + 10·x2 + N(0, 5²)`.
fn linear_fixture(n: usize, seed: u64) -> (DenseMatrix<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let x = random_matrix(n, 3, &mut r);
    let noise = Normal::new(0.0, NOISE).unwrap();
    let y = (0..n).map(|i| 300.0 + 40.0 * x[(i, 0)] - 25.0 * x[(i, 1)] + 10.0 * x[(i, 2)] + noise.sample(&mut r)).collect();
    (x, y)
}

fn fixture_config() -> RegressorTrainConfig {
    RegressorTrainConfig { epochs: 40, learning_rate: 1e-3, batch_size: 32, seed: 9, patience: None }
}

#[test]
fn learns_a_noisy_linear_target() {
    let (tx, ty) = linear_fixture(2000, 1);
    let (vx, vy) = linear_fixture(300, 2);
    let (sx, sy) = linear_fixture(500, 3);
    let (model, history) = train_regressor::<f64>(&tx, &ty, &vx, &vy, MlpConfig::new(3), &fixture_config()).unwrap();
    assert_eq!(history.len(), 40);
    let m = compute_metrics(&sy, &model.predict(&sx).unwrap()).unwrap();
    let mean = ty.iter().sum::<f64>() / ty.len() as f64;
    let naive = compute_metrics(&sy, &vec![mean; sy.len()]).unwrap();
    assert!(m.mae < 2.0 * NOISE, "mae {} vs noise {NOISE}", m.mae);
    assert!(m.mae < 0.5 * naive.mae, "mae {} vs mean predictor {}", m.mae, naive.mae);
}

#[test]
fn training_is_deterministic() {
    let (tx, ty) = linear_fixture(400, 4);
    let (vx, vy) = linear_fixture(100, 5);
    let cfg = RegressorTrainConfig { epochs: 5, ..fixture_config() };
    let (a, ha) = train_regressor::<f64>(&tx, &ty, &vx, &vy, MlpConfig::new(3), &cfg).unwrap();
    let (b, hb) = train_regressor::<f64>(&tx, &ty, &vx, &vy, MlpConfig::new(3), &cfg).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a.predict(&vx).unwrap(), b.predict(&vx).unwrap());
}

#[test]
fn keeps_the_best_validation_epoch() {
    let (tx, ty) = linear_fixture(400, 6);
    let (vx, vy) = linear_fixture(100, 7);
    let (model, history) = train_regressor::<f64>(&tx, &ty, &vx, &vy, MlpConfig::new(3), &fixture_config()).unwrap();
    let best = history.iter().map(|h| h.val_mae).fold(f64::INFINITY, f64::min);
    let m = compute_metrics(&vy, &model.predict(&vx).unwrap()).unwrap();
    assert!((m.mae - best).abs() < 1e-9);
}

#[test]
fn patience_stops_early() {
    let (tx, ty) = linear_fixture(200, 8);
    let (vx, vy) = linear_fixture(50, 9);
    let cfg = RegressorTrainConfig { epochs: 30, learning_rate: 0.0, patience: Some(3), ..fixture_config() };
    let (_, history) = train_regressor::<f64>(&tx, &ty, &vx, &vy, MlpConfig::new(3), &cfg).unwrap();
    assert_eq!(history.len(), 4);
}

#[test]
fn save_and_load_round_trip() {
    let (tx, ty) = linear_fixture(300, 10);
    let (vx, vy) = linear_fixture(60, 11);
    let cfg = RegressorTrainConfig { epochs: 3, ..fixture_config() };
    let (model, _) = train_regressor::<f32>(&tx, &ty, &vx, &vy, MlpConfig::new(3), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_regressor(dir.path(), &model).unwrap();
    let loaded = load_regressor::<f32>(dir.path()).unwrap();
    assert_eq!(model.predict(&vx).unwrap(), loaded.predict(&vx).unwrap());
    // A 32-bit file widens losslessly into a 64-bit model.
    let wide = load_regressor::<f64>(dir.path()).unwrap();
    for (a, b) in model.predict(&vx).unwrap().iter().zip(wide.predict(&vx).unwrap()) {
        assert!((a - b).abs() < 1e-3 * a.abs().max(1.0));
    }
}
