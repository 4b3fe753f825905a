use super::{DenseMatrix, NumericError};
use crate::scalar::Scalar;

/// Handle to a tensor registered in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: DenseMatrix<T>,
    pub grad: DenseMatrix<T>,
}

/// Named trainable tensors, each paired with a gradient buffer of the same shape.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, value: DenseMatrix<T>) -> ParamId {
        let (r, c) = value.shape();
        self.params.push(Param { name: name.into(), value, grad: DenseMatrix::zeros(r, c) });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &DenseMatrix<T> {
        &self.params[id.0].value
    }

    #[inline]
    pub fn value_mut(&mut self, id: ParamId) -> &mut DenseMatrix<T> {
        &mut self.params[id.0].value
    }

    #[inline]
    pub fn grad(&self, id: ParamId) -> &DenseMatrix<T> {
        &self.params[id.0].grad
    }

    #[inline]
    pub fn grad_mut(&mut self, id: ParamId) -> &mut DenseMatrix<T> {
        &mut self.params[id.0].grad
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    /// Adds `delta` into the gradient buffer of `id`.
    pub fn accumulate(&mut self, id: ParamId, delta: &DenseMatrix<T>) -> Result<(), NumericError> {
        self.params[id.0].grad.add_assign(delta)
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.rows() * p.value.cols()).sum()
    }

    /// Copies every value from `other`, which must have the same layout.
    pub fn copy_values_from(&mut self, other: &Self) -> Result<(), NumericError> {
        if self.params.len() != other.params.len() {
            return Err(NumericError::ShapeMismatch {
                op: "copy_values_from",
                left: (self.params.len(), 0),
                right: (other.params.len(), 0),
            });
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            if dst.value.shape() != src.value.shape() {
                return Err(NumericError::ShapeMismatch {
                    op: "copy_values_from",
                    left: dst.value.shape(),
                    right: src.value.shape(),
                });
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }
}
