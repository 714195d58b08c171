//! Quadratic state costs and control penalties.

use nalgebra::{DMatrix, DVector};

use crate::problem::CostFunction;

/// `c(x) = 1/2 x^T Q x + q^T x + c0` with symmetric `Q` assumed positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
}

impl QuadraticCost {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>, constant: f64) -> Self {
        assert!(hessian.is_square(), "cost Hessian must be square");
        assert_eq!(hessian.nrows(), linear.len(), "cost Hessian and linear term disagree");
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        Self {
            hessian,
            linear,
            constant,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(DMatrix::zeros(dim, dim), DVector::zeros(dim), 0.0)
    }

    /// `1/2 (x - target)^T Q (x - target)`.
    pub fn tracking(weight: DMatrix<f64>, target: &DVector<f64>) -> Self {
        let linear = -(&weight * target);
        let constant = 0.5 * target.dot(&(&weight * target));
        Self::new(weight, linear, constant)
    }

    /// `scale * ||x||^2`, i.e. `Q = 2 scale I`.
    pub fn squared_norm(dim: usize, scale: f64) -> Self {
        Self::new(DMatrix::identity(dim, dim) * (2.0 * scale), DVector::zeros(dim), 0.0)
    }

    pub fn hessian_matrix(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }
}

impl CostFunction for QuadraticCost {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x) + self.constant
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.hessian * x + &self.linear
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.hessian.clone()
    }

    fn is_zero(&self) -> bool {
        self.constant == 0.0
            && self.linear.iter().all(|v| *v == 0.0)
            && self.hessian.iter().all(|v| *v == 0.0)
    }

    fn is_quadratic(&self) -> bool {
        true
    }
}
