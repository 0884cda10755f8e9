use std::collections::HashMap;

use super::{Expr, Node, Var};

impl Expr {
    /// Exact symbolic partial derivative with respect to `var`.
    pub fn diff(&self, var: Var) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(var, &mut memo)
    }

    /// Partial derivative with respect to the coordinate with 0-based index `axis`.
    pub fn diff_x(&self, axis: usize) -> Expr {
        self.diff(Var::X(axis))
    }

    fn diff_memo(&self, var: Var, memo: &mut HashMap<*const Node, Expr>) -> Expr {
        if let Some(d) = memo.get(&self.key()) {
            return d.clone();
        }
        let d = match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(v) => {
                if *v == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => a.diff_memo(var, memo).neg(),
            Node::Add(a, b) => a.diff_memo(var, memo).add(&b.diff_memo(var, memo)),
            Node::Sub(a, b) => a.diff_memo(var, memo).sub(&b.diff_memo(var, memo)),
            Node::Mul(a, b) => {
                let da = a.diff_memo(var, memo);
                let db = b.diff_memo(var, memo);
                da.mul(b).add(&a.mul(&db))
            }
            Node::Div(a, b) => {
                let da = a.diff_memo(var, memo);
                let db = b.diff_memo(var, memo);
                if db.is_zero() {
                    da.div(b)
                } else {
                    da.mul(b).sub(&a.mul(&db)).div(&b.powi(2))
                }
            }
            Node::Pow(a, n) => {
                let da = a.diff_memo(var, memo);
                Expr::int(i64::from(*n)).mul(&a.powi(n - 1)).mul(&da)
            }
            Node::Sqrt(a) => {
                let da = a.diff_memo(var, memo);
                da.div(&Expr::int(2).mul(self))
            }
        };
        memo.insert(self.key(), d.clone());
        d
    }

    /// All first partials `∂/∂x_i`, `i = 0..n`.
    pub fn gradient(&self, n: usize) -> Vec<Expr> {
        (0..n).map(|i| self.diff_x(i)).collect()
    }

    /// Symmetric matrix of second partials; each mixed partial is built once
    /// per unordered pair and shared by both slots.
    pub fn hessian(&self, n: usize) -> Vec<Vec<Expr>> {
        let grad = self.gradient(n);
        let mut h = vec![vec![Expr::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let d = grad[i].diff_x(j);
                h[j][i] = d.clone();
                h[i][j] = d;
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn central_difference(e: &Expr, p: &[f64], axis: usize) -> f64 {
        let h = p[axis].abs().max(1.0) * f64::EPSILON.cbrt();
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[axis] += h;
        minus[axis] -= h;
        (e.eval_at(&plus).unwrap() - e.eval_at(&minus).unwrap()) / (2.0 * h)
    }

    #[test]
    fn power_rule() {
        let d = parse("x1^2", 1).unwrap().diff_x(0);
        assert_eq!(d, parse("2*x1", 1).unwrap());
    }

    #[test]
    fn constant_has_zero_derivative() {
        assert!(parse("5", 2).unwrap().diff_x(1).is_zero());
    }

    #[test]
    fn quotient_rule_matches_closed_form() {
        let e = parse("(x2-1)/(2*x1)", 2).unwrap();
        let d = e.diff_x(0);
        let closed = parse("-(x2-1)/(2*x1^2)", 2).unwrap();
        let pts = [[0.7, 3.0], [1.3, -2.0], [-0.4, 0.5], [2.5, 1.0]];
        for p in pts {
            let got = d.eval_at(&p).unwrap();
            let want = closed.eval_at(&p).unwrap();
            assert!((got - want).abs() <= 1e-14 * (1.0 + want.abs()));
            assert!((got - central_difference(&e, &p, 0)).abs() <= 1e-6 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn gradient_and_hessian_of_simple_forms() {
        let g = parse("x1*x2", 2).unwrap().gradient(2);
        assert_eq!(g, vec![Expr::var(1), Expr::var(0)]);
        let h = parse("x1^2+x2^2", 2).unwrap().hessian(2);
        assert_eq!(h[0][0], Expr::int(2));
        assert_eq!(h[1][1], Expr::int(2));
        assert!(h[0][1].is_zero() && h[1][0].is_zero());
    }

    #[test]
    fn sqrt_derivative_is_singular_at_branch_point() {
        let d = parse("sqrt(x1)", 1).unwrap().diff_x(0);
        assert!(d.eval_at(&[0.0]).is_err());
        assert!((d.eval_at(&[4.0]).unwrap() - 0.25).abs() < 1e-15);
    }
}
