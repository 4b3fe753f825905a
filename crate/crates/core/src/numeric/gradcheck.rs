//! Central-difference gradient checking against analytic gradients held in a
//! [`ParamStore`].

use super::{ParamId, ParamStore};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Upper bound on checked coordinates per tensor; `None` checks all.
    pub max_coords_per_param: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { eps: 1e-5, max_coords_per_param: Some(64) }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor and flat coordinate where `max_rel_error` occurred.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares `store`'s gradient buffers against central differences of `loss`.
///
/// The relative error per coordinate is `|g_fd − g| / max(1, |g_fd|, |g|)`; the
/// report carries the maximum over all sampled coordinates. Parameter values are
/// restored exactly after each probe.
pub fn finite_difference_check<T, F>(store: &mut ParamStore<T>, cfg: GradCheckConfig, mut loss: F) -> GradCheckReport
where
    T: Scalar,
    F: FnMut(&ParamStore<T>) -> f64,
{
    let ids: Vec<ParamId> = store.ids().collect();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0 };
    for id in ids {
        let len = store.value(id).as_slice().len();
        for coord in sample_coords(len, cfg.max_coords_per_param) {
            let original = store.value(id).as_slice()[coord];
            let x = original.as_f64();
            store.value_mut(id).as_mut_slice()[coord] = T::cast_from(x + cfg.eps);
            let up = loss(store);
            store.value_mut(id).as_mut_slice()[coord] = T::cast_from(x - cfg.eps);
            let down = loss(store);
            store.value_mut(id).as_mut_slice()[coord] = original;

            let fd = (up - down) / (2.0 * cfg.eps);
            let analytic = store.grad(id).as_slice()[coord].as_f64();
            let rel = (fd - analytic).abs() / 1f64.max(fd.abs()).max(analytic.abs());
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((store.name(id).to_string(), coord));
            }
        }
    }
    report
}

/// Evenly strided coordinates, always including the first and last.
fn sample_coords(len: usize, limit: Option<usize>) -> Vec<usize> {
    match limit {
        Some(k) if k < len && k > 0 => {
            if k == 1 {
                return vec![0];
            }
            let mut out: Vec<usize> = (0..k).map(|i| i * (len - 1) / (k - 1)).collect();
            out.dedup();
            out
        }
        _ => (0..len).collect(),
    }
}
