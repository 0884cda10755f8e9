//! Scalar fields with value, gradient and Hessian at a point.

use thiserror::Error;

use crate::expr::{EvalError, Expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("implicit solve failed: {0}")]
    Solve(String),
}

/// Second-order jet of a scalar field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

impl Jet {
    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn grad_max(&self) -> f64 {
        self.grad.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn hess_max(&self) -> f64 {
        self.hess.iter().flatten().fold(0.0, |m, h| m.max(h.abs()))
    }
}

pub trait ScalarField {
    fn dimension(&self) -> usize;

    fn value(&self, point: &[f64]) -> Result<f64, FieldError>;

    fn jet(&self, point: &[f64]) -> Result<Jet, FieldError>;
}

/// A web function given in closed form, with its first and second partials
/// differentiated symbolically once.
#[derive(Clone, Debug)]
pub struct WebFunction {
    expr: Expr,
    grad: Vec<Expr>,
    hess: Vec<Vec<Expr>>,
}

impl WebFunction {
    pub fn new(expr: Expr, n: usize) -> Self {
        let grad = expr.gradient(n);
        let mut hess = vec![vec![Expr::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let d = grad[i].diff_x(j);
                hess[j][i] = d.clone();
                hess[i][j] = d;
            }
        }
        WebFunction {
            expr,
            grad,
            hess,
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn partial(&self, i: usize) -> &Expr {
        &self.grad[i]
    }

    pub fn second_partial(&self, i: usize, j: usize) -> &Expr {
        &self.hess[i][j]
    }
}

impl ScalarField for WebFunction {
    fn dimension(&self) -> usize {
        self.grad.len()
    }

    fn value(&self, point: &[f64]) -> Result<f64, FieldError> {
        Ok(self.expr.eval_at(point)?)
    }

    fn jet(&self, point: &[f64]) -> Result<Jet, FieldError> {
        let value = self.expr.eval_at(point)?;
        let grad = self
            .grad
            .iter()
            .map(|g| g.eval_at(point))
            .collect::<Result<Vec<_>, _>>()?;
        let n = grad.len();
        let mut hess = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = self.hess[i][j].eval_at(point)?;
                hess[i][j] = v;
                hess[j][i] = v;
            }
        }
        Ok(Jet { value, grad, hess })
    }
}
