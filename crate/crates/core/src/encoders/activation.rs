use serde::{Deserialize, Serialize};

use crate::numeric::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Identity => x,
        }
    }

    /// Derivative evaluated at the pre-activation value.
    #[inline]
    pub fn derivative<T: Scalar>(self, pre: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }

    pub fn forward<T: Scalar>(self, pre: &DenseMatrix<T>) -> DenseMatrix<T> {
        match self {
            Activation::Identity => pre.clone(),
            _ => pre.map(|v| self.apply(v)),
        }
    }

    /// `grad_out ⊙ σ'(pre)`.
    pub fn backward<T: Scalar>(self, pre: &DenseMatrix<T>, grad_out: &DenseMatrix<T>) -> DenseMatrix<T> {
        match self {
            Activation::Identity => grad_out.clone(),
            _ => {
                let mut g = grad_out.clone();
                for (gv, &p) in g.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                    *gv *= self.derivative(p);
                }
                g
            }
        }
    }
}

/// Negative slope of the LeakyReLU applied to attention logits.
pub const ATTENTION_LEAKY_SLOPE: f64 = 0.2;

#[inline]
pub fn leaky_relu<T: Scalar>(x: T, slope: T) -> T {
    if x > T::zero() {
        x
    } else {
        x * slope
    }
}
