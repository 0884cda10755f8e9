use thiserror::Error;

use super::{Expr, Node, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    NegativeRadicand(f64),
    #[error("expression mentions the parameter C but no value was supplied")]
    MissingParameter,
    #[error("coordinate x{index} requested but the point has {available} coordinates")]
    MissingCoordinate { index: usize, available: usize },
    #[error("non-finite intermediate value")]
    NonFinite,
}

impl Expr {
    /// Evaluates at `point` (coordinates `x1..xn` in order) with optional
    /// parameter value `param` for `C`.
    pub fn eval(&self, point: &[f64], param: Option<f64>) -> Result<f64, EvalError> {
        let v = match self.node() {
            Node::Const(c) => c.value(),
            Node::Var(Var::X(i)) => *point.get(*i).ok_or(EvalError::MissingCoordinate {
                index: i + 1,
                available: point.len(),
            })?,
            Node::Var(Var::Param) => param.ok_or(EvalError::MissingParameter)?,
            Node::Neg(a) => -a.eval(point, param)?,
            Node::Sqrt(a) => {
                let r = a.eval(point, param)?;
                if r < 0.0 {
                    return Err(EvalError::NegativeRadicand(r));
                }
                r.sqrt()
            }
            Node::Add(a, b) => a.eval(point, param)? + b.eval(point, param)?,
            Node::Sub(a, b) => a.eval(point, param)? - b.eval(point, param)?,
            Node::Mul(a, b) => a.eval(point, param)? * b.eval(point, param)?,
            Node::Div(a, b) => {
                let den = b.eval(point, param)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(point, param)? / den
            }
            Node::Pow(a, n) => a.eval(point, param)?.powi(*n as i32),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Evaluation of a parameter-free expression.
    pub fn eval_at(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.eval(point, None)
    }
}
