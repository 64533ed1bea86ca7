//! The differentiable scalar map the subspace machinery works against.
//!
//! [`NetworkQoi`] adapts a trained network; [`LinearFunction`] and
//! [`QuadraticFunction`] have closed-form gradients and moments and serve as
//! oracles for the estimators.

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netcore::{DenseNetwork, NetError, QoiSpec};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model input dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Network(#[from] NetError),
}

/// A scalar function of a `dim()`-vector with an input gradient.
pub trait ScalarModel {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64, ModelError>;

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError>;
}

impl<M: ScalarModel + ?Sized> ScalarModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64, ModelError> {
        (**self).value(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        (**self).value_and_gradient(x)
    }
}

/// One class score of a network.
#[derive(Debug, Clone, Copy)]
pub struct NetworkQoi<'a> {
    pub network: &'a DenseNetwork,
    pub spec: QoiSpec,
}

impl<'a> NetworkQoi<'a> {
    pub fn new(network: &'a DenseNetwork, spec: QoiSpec) -> Self {
        Self { network, spec }
    }
}

impl ScalarModel for NetworkQoi<'_> {
    fn dim(&self) -> usize {
        self.network.input_dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(self.network.qoi(x, &self.spec)?)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        Ok(self.network.qoi_and_grad(x, &self.spec)?)
    }
}

fn check_dim(expected: usize, x: &[f64]) -> Result<(), ModelError> {
    if x.len() != expected {
        return Err(ModelError::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// `f(x) = aᵀx + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunction {
    pub coefficients: Vec<f64>,
    pub offset: f64,
}

impl ScalarModel for LinearFunction {
    fn dim(&self) -> usize {
        self.coefficients.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64, ModelError> {
        check_dim(self.dim(), x)?;
        Ok(crate::numkit::dot(&self.coefficients, x) + self.offset)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        Ok((self.value(x)?, self.coefficients.clone()))
    }
}

/// `f(x) = ½ xᵀ diag(a)² x`, gradient `diag(a)² x`.
///
/// Under `x ~ N(0, I)` the gradient outer-product expectation is `diag(aᵢ⁴)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFunction {
    pub scales: Vec<f64>,
}

impl ScalarModel for QuadraticFunction {
    fn dim(&self) -> usize {
        self.scales.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64, ModelError> {
        check_dim(self.dim(), x)?;
        Ok(0.5 * self.scales.iter().zip(x).map(|(a, v)| (a * v).powi(2)).sum::<f64>())
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        let value = self.value(x)?;
        let grad = self.scales.iter().zip(x).map(|(a, v)| a * a * v).collect();
        Ok((value, grad))
    }
}

/// Model evaluation counts.
///
/// `forward_calls` counts every evaluation point; `gradient_calls` counts the
/// backward sweeps among them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationCost {
    pub forward_calls: u64,
    pub gradient_calls: u64,
}

impl EvaluationCost {
    /// Forward-equivalent cost with a gradient weighted as two forward passes.
    pub fn weighted(&self) -> f64 {
        self.forward_calls as f64 + 2.0 * self.gradient_calls as f64
    }

    pub fn evaluations(&self) -> u64 {
        self.forward_calls
    }
}

impl std::ops::Add for EvaluationCost {
    type Output = EvaluationCost;

    fn add(self, rhs: Self) -> Self {
        Self {
            forward_calls: self.forward_calls + rhs.forward_calls,
            gradient_calls: self.gradient_calls + rhs.gradient_calls,
        }
    }
}

/// Wraps a model and counts its evaluations.
#[derive(Debug)]
pub struct CountingModel<M> {
    inner: M,
    forward: Cell<u64>,
    gradient: Cell<u64>,
}

impl<M: ScalarModel> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            forward: Cell::new(0),
            gradient: Cell::new(0),
        }
    }

    pub fn cost(&self) -> EvaluationCost {
        EvaluationCost {
            forward_calls: self.forward.get(),
            gradient_calls: self.gradient.get(),
        }
    }
}

impl<M: ScalarModel> ScalarModel for CountingModel<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.forward.set(self.forward.get() + 1);
        self.inner.value(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        self.forward.set(self.forward.get() + 1);
        self.gradient.set(self.gradient.get() + 1);
        self.inner.value_and_gradient(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_and_counter() {
        let lin = LinearFunction {
            coefficients: vec![1.0, -2.0],
            offset: 0.5,
        };
        assert_eq!(lin.value(&[3.0, 1.0]).unwrap(), 1.5);
        let quad = QuadraticFunction { scales: vec![2.0, 1.0] };
        let (v, g) = quad.value_and_gradient(&[1.0, 3.0]).unwrap();
        assert_eq!(v, 0.5 * (4.0 + 9.0));
        assert_eq!(g, vec![4.0, 3.0]);
        assert!(quad.value(&[1.0]).is_err());

        let counted = CountingModel::new(&lin);
        counted.value(&[0.0, 0.0]).unwrap();
        counted.value_and_gradient(&[0.0, 0.0]).unwrap();
        assert_eq!(
            counted.cost(),
            EvaluationCost {
                forward_calls: 2,
                gradient_calls: 1
            }
        );
        assert_eq!(counted.cost().weighted(), 4.0);
    }
}
