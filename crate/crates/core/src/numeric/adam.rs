use super::{DenseMatrix, NumericError, ParamStore};
use crate::scalar::Scalar;

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<DenseMatrix<T>>,
    second: Vec<DenseMatrix<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    fn ensure_buffers(&mut self, params: &ParamStore<T>) {
        if self.first.len() != params.len() {
            self.first = params.iter().map(|p| DenseMatrix::zeros(p.value.rows(), p.value.cols())).collect();
            self.second = self.first.clone();
        }
    }

    /// Applies one update from the current gradient buffers. Gradients are left
    /// in place; the caller zeroes them before the next backward pass.
    pub fn step(&mut self, params: &mut ParamStore<T>) -> Result<(), NumericError> {
        for p in params.iter() {
            if !p.grad.is_finite() {
                return Err(NumericError::NaNGradient { param: p.name.clone() });
            }
        }
        self.ensure_buffers(params);
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        for (k, p) in params.params_mut().iter_mut().enumerate() {
            let m = self.first[k].as_mut_slice();
            let v = self.second[k].as_mut_slice();
            let grads = p.grad.as_slice();
            for (((w, &g), mi), vi) in p.value.as_mut_slice().iter_mut().zip(grads).zip(m).zip(v) {
                let g = g.as_f64();
                let m_new = b1 * mi.as_f64() + (1.0 - b1) * g;
                let v_new = b2 * vi.as_f64() + (1.0 - b2) * g * g;
                *mi = T::cast_from(m_new);
                *vi = T::cast_from(v_new);
                let m_hat = m_new / bc1;
                let v_hat = v_new / bc2;
                let update = lr * m_hat / (v_hat.sqrt() + eps);
                *w = T::cast_from(w.as_f64() - update);
            }
        }
        Ok(())
    }
}
