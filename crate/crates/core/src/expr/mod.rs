//! Expression trees over the coordinates `x1..xn` and the family parameter `C`.
//!
//! Web functions, metric entries, initial conditions and the `Ψ` functions of
//! the Euler construction are all carried as [`Expr`] values. Trees are
//! immutable and cheaply clonable (`Arc`-shared), so derivative trees reuse the
//! subtrees of their source.

mod diff;
mod eval;
mod parse;
pub mod poly;

use std::collections::HashMap;
use std::fmt;
use std::ops;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use eval::EvalError;
pub use parse::{parse, parse_univariate, ParseError, UNIVARIATE_NAME};
pub use poly::{Monomial, Poly, PolyError};

/// A variable reference: a coordinate (0-based index, printed as `x{i+1}`)
/// or the distinguished family parameter `C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    Param,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::Param => f.write_str("C"),
        }
    }
}

/// A numeric literal. Integer ratios stay exact; decimal literals are doubles.
#[derive(Clone, Debug)]
pub enum Constant {
    Rational { exact: BigRational, approx: f64 },
    Float(f64),
}

impl Constant {
    pub fn rational(exact: BigRational) -> Self {
        let approx = exact.to_f64().unwrap_or(f64::NAN);
        Constant::Rational { exact, approx }
    }

    pub fn value(&self) -> f64 {
        match self {
            Constant::Rational { approx, .. } => *approx,
            Constant::Float(v) => *v,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Constant::Rational { exact, .. } => exact.is_zero(),
            Constant::Float(v) => *v == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Constant::Rational { exact, .. } => exact.is_one(),
            Constant::Float(v) => *v == 1.0,
        }
    }

    fn is_negative(&self) -> bool {
        match self {
            Constant::Rational { exact, .. } => exact.is_negative(),
            Constant::Float(v) => v.is_sign_negative(),
        }
    }

    fn neg(&self) -> Constant {
        match self {
            Constant::Rational { exact, .. } => Constant::rational(-exact.clone()),
            Constant::Float(v) => Constant::Float(-v),
        }
    }

    fn combine(
        &self,
        other: &Constant,
        exact_op: impl Fn(&BigRational, &BigRational) -> BigRational,
        float_op: impl Fn(f64, f64) -> f64,
    ) -> Constant {
        match (self, other) {
            (Constant::Rational { exact: a, .. }, Constant::Rational { exact: b, .. }) => {
                Constant::rational(exact_op(a, b))
            }
            _ => Constant::Float(float_op(self.value(), other.value())),
        }
    }
}

impl PartialEq for Constant {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Constant::Rational { exact: a, .. }, Constant::Rational { exact: b, .. }) => a == b,
            (Constant::Float(a), Constant::Float(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(Constant),
    Var(Var),
    Neg(Expr),
    Sqrt(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, u32),
}

/// Immutable expression tree. Equality is structural.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Expr {
    fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    fn key(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    pub fn constant(c: Constant) -> Self {
        Expr::from_node(Node::Const(c))
    }

    pub fn int(v: i64) -> Self {
        Expr::constant(Constant::rational(BigRational::from_integer(BigInt::from(v))))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Expr::constant(Constant::rational(BigRational::new(
            BigInt::from(num),
            BigInt::from(den),
        )))
    }

    pub fn exact(value: BigRational) -> Self {
        Expr::constant(Constant::rational(value))
    }

    /// Integral doubles of moderate size become exact integers.
    pub fn float(v: f64) -> Self {
        if v.fract() == 0.0 && v.abs() < 1e15 {
            Expr::int(v as i64)
        } else {
            Expr::constant(Constant::Float(v))
        }
    }

    pub fn var(index: usize) -> Self {
        Expr::from_node(Node::Var(Var::X(index)))
    }

    pub fn param() -> Self {
        Expr::from_node(Node::Var(Var::Param))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn as_constant(&self) -> Option<&Constant> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant().is_some_and(Constant::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(Constant::is_one)
    }

    /// Exact value of a constant subtree, if it is free of variables, radicals
    /// and decimal literals.
    pub fn exact_value(&self) -> Option<BigRational> {
        match self.node() {
            Node::Const(Constant::Rational { exact, .. }) => Some(exact.clone()),
            Node::Const(Constant::Float(_)) | Node::Var(_) | Node::Sqrt(_) => None,
            Node::Neg(a) => a.exact_value().map(|v| -v),
            Node::Add(a, b) => Some(a.exact_value()? + b.exact_value()?),
            Node::Sub(a, b) => Some(a.exact_value()? - b.exact_value()?),
            Node::Mul(a, b) => Some(a.exact_value()? * b.exact_value()?),
            Node::Div(a, b) => {
                let d = b.exact_value()?;
                if d.is_zero() {
                    None
                } else {
                    Some(a.exact_value()? / d)
                }
            }
            Node::Pow(a, n) => Some(num_traits::pow(a.exact_value()?, *n as usize)),
        }
    }

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(c.neg()),
            Node::Neg(a) => a.clone(),
            _ => Expr::from_node(Node::Neg(self.clone())),
        }
    }

    pub fn add(&self, rhs: &Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) => Expr::constant(a.combine(b, |x, y| x + y, |x, y| x + y)),
            (Some(a), _) if a.is_zero() => rhs.clone(),
            (_, Some(b)) if b.is_zero() => self.clone(),
            (_, Some(b)) if b.is_negative() => {
                Expr::from_node(Node::Sub(self.clone(), Expr::constant(b.neg())))
            }
            _ => match rhs.node() {
                Node::Neg(inner) => Expr::from_node(Node::Sub(self.clone(), inner.clone())),
                _ => Expr::from_node(Node::Add(self.clone(), rhs.clone())),
            },
        }
    }

    pub fn sub(&self, rhs: &Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) => Expr::constant(a.combine(b, |x, y| x - y, |x, y| x - y)),
            (Some(a), _) if a.is_zero() => rhs.neg(),
            (_, Some(b)) if b.is_zero() => self.clone(),
            _ => match rhs.node() {
                Node::Neg(inner) => Expr::from_node(Node::Add(self.clone(), inner.clone())),
                _ => Expr::from_node(Node::Sub(self.clone(), rhs.clone())),
            },
        }
    }

    pub fn mul(&self, rhs: &Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) => Expr::constant(a.combine(b, |x, y| x * y, |x, y| x * y)),
            (Some(a), _) | (_, Some(a)) if a.is_zero() => Expr::zero(),
            (Some(a), _) if a.is_one() => rhs.clone(),
            (_, Some(b)) if b.is_one() => self.clone(),
            (Some(a), _) if a.neg().is_one() => rhs.neg(),
            (_, Some(b)) if b.neg().is_one() => self.neg(),
            _ => Expr::from_node(Node::Mul(self.clone(), rhs.clone())),
        }
    }

    /// Quotient. A constant-zero denominator is kept as a node (evaluation
    /// then reports division by zero) rather than folded.
    pub fn div(&self, rhs: &Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (_, Some(b)) if b.is_zero() => Expr::from_node(Node::Div(self.clone(), rhs.clone())),
            (Some(a), Some(b)) => Expr::constant(a.combine(b, |x, y| x / y, |x, y| x / y)),
            (Some(a), _) if a.is_zero() => Expr::zero(),
            (_, Some(b)) if b.is_one() => self.clone(),
            _ => Expr::from_node(Node::Div(self.clone(), rhs.clone())),
        }
    }

    pub fn powi(&self, exponent: u32) -> Expr {
        match (exponent, self.as_constant()) {
            (0, _) => Expr::one(),
            (1, _) => self.clone(),
            (_, Some(Constant::Rational { exact, .. })) => {
                Expr::exact(num_traits::pow(exact.clone(), exponent as usize))
            }
            (_, Some(Constant::Float(v))) => Expr::constant(Constant::Float(v.powi(exponent as i32))),
            _ => Expr::from_node(Node::Pow(self.clone(), exponent)),
        }
    }

    pub fn sqrt(&self) -> Expr {
        if self.is_zero() || self.is_one() {
            return self.clone();
        }
        Expr::from_node(Node::Sqrt(self.clone()))
    }

    /// Number of coordinates the expression needs (one past the largest
    /// coordinate index it mentions).
    pub fn dimension(&self) -> usize {
        let mut dim = 0;
        self.visit(&mut |node| {
            if let Node::Var(Var::X(i)) = node {
                dim = dim.max(i + 1);
            }
        });
        dim
    }

    pub fn mentions_param(&self) -> bool {
        let mut found = false;
        self.visit(&mut |node| found |= matches!(node, Node::Var(Var::Param)));
        found
    }

    pub fn has_sqrt(&self) -> bool {
        let mut found = false;
        self.visit(&mut |node| found |= matches!(node, Node::Sqrt(_)));
        found
    }

    fn visit(&self, f: &mut impl FnMut(&Node)) {
        f(self.node());
        match self.node() {
            Node::Const(_) | Node::Var(_) => {}
            Node::Neg(a) | Node::Sqrt(a) | Node::Pow(a, _) => a.visit(f),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Replaces every variable for which `map` returns a value.
    pub fn substitute(&self, map: &dyn Fn(Var) -> Option<Expr>) -> Expr {
        let mut memo = HashMap::new();
        self.substitute_memo(map, &mut memo)
    }

    fn substitute_memo(
        &self,
        map: &dyn Fn(Var) -> Option<Expr>,
        memo: &mut HashMap<*const Node, Expr>,
    ) -> Expr {
        if let Some(done) = memo.get(&self.key()) {
            return done.clone();
        }
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(v) => map(*v).unwrap_or_else(|| self.clone()),
            Node::Neg(a) => a.substitute_memo(map, memo).neg(),
            Node::Sqrt(a) => a.substitute_memo(map, memo).sqrt(),
            Node::Pow(a, n) => a.substitute_memo(map, memo).powi(*n),
            Node::Add(a, b) => a.substitute_memo(map, memo).add(&b.substitute_memo(map, memo)),
            Node::Sub(a, b) => a.substitute_memo(map, memo).sub(&b.substitute_memo(map, memo)),
            Node::Mul(a, b) => a.substitute_memo(map, memo).mul(&b.substitute_memo(map, memo)),
            Node::Div(a, b) => a.substitute_memo(map, memo).div(&b.substitute_memo(map, memo)),
        };
        memo.insert(self.key(), out.clone());
        out
    }

    /// `self` with the coordinate `x1` replaced by `inner`; used to compose a
    /// univariate function (written in `t`) with another expression.
    pub fn compose(&self, inner: &Expr) -> Expr {
        self.substitute(&|v| (v == Var::X(0)).then(|| inner.clone()))
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $inherent:ident) => {
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$inherent(self, rhs)
            }
        }
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$inherent(&self, &rhs)
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$inherent(&self, rhs)
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$inherent(self, &rhs)
            }
        }
    };
}

binary_op!(Add, add, add);
binary_op!(Sub, sub, sub);
binary_op!(Mul, mul, mul);
binary_op!(Div, div, div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

// Printing precedence levels. The printer emits the minimum parentheses that
// make the parser rebuild the same tree.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Add(..) | Node::Sub(..) => PREC_ADD,
        Node::Mul(..) | Node::Div(..) => PREC_MUL,
        Node::Neg(_) => PREC_UNARY,
        Node::Pow(..) => 4,
        Node::Var(_) | Node::Sqrt(_) => PREC_ATOM,
        Node::Const(c) => {
            if c.is_negative() {
                PREC_UNARY.min(const_prec_unsigned(c))
            } else {
                const_prec_unsigned(c)
            }
        }
    }
}

fn const_prec_unsigned(c: &Constant) -> u8 {
    match c {
        Constant::Rational { exact, .. } if !exact.is_integer() => PREC_MUL,
        _ => PREC_ATOM,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Rational { exact, .. } => {
                if exact.is_integer() {
                    write!(f, "{}", exact.numer())
                } else {
                    write!(f, "{}/{}", exact.numer(), exact.denom())
                }
            }
            Constant::Float(v) => write!(f, "{v:?}"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let binary = |f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr, prec: u8| {
            write_child(f, a, precedence(a) < prec)?;
            f.write_str(op)?;
            write_child(f, b, precedence(b) <= prec)
        };
        match self.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, precedence(a) < PREC_UNARY)
            }
            Node::Sqrt(a) => write!(f, "sqrt({a})"),
            Node::Add(a, b) => binary(f, a, " + ", b, PREC_ADD),
            Node::Sub(a, b) => binary(f, a, " - ", b, PREC_ADD),
            Node::Mul(a, b) => binary(f, a, "*", b, PREC_MUL),
            Node::Div(a, b) => binary(f, a, "/", b, PREC_MUL),
            Node::Pow(a, n) => {
                write_child(f, a, precedence(a) < PREC_ATOM)?;
                write!(f, "^{n}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smart_constructors_fold_constants() {
        let x = Expr::var(0);
        assert_eq!(&Expr::int(2) + &Expr::int(3), Expr::int(5));
        assert_eq!(&x * &Expr::zero(), Expr::zero());
        assert_eq!(&x * &Expr::one(), x);
        assert_eq!(&x + &Expr::zero(), x);
        assert_eq!(Expr::ratio(1, 2) + Expr::ratio(1, 3), Expr::ratio(5, 6));
        assert_eq!(Expr::zero() - x.clone(), x.neg());
        assert_eq!(x.neg().neg(), x);
        assert_eq!(x.powi(0), Expr::one());
    }

    #[test]
    fn display_uses_minimal_parentheses() {
        let e = parse("(x1 + x2)*x3 - x1/(x2*x3) + (-2)^3", 3).unwrap();
        assert_eq!(e.to_string(), "(x1 + x2)*x3 - x1/(x2*x3) + (-2)^3");
        let e = parse("x1 - (x2 - x3)", 3).unwrap();
        assert_eq!(e.to_string(), "x1 - (x2 - x3)");
        let e = parse("-x1^2", 1).unwrap();
        assert_eq!(e.to_string(), "-x1^2");
        let e = parse("(-x1)^2", 1).unwrap();
        assert_eq!(e.to_string(), "(-x1)^2");
    }

    #[test]
    fn dimension_and_param_detection() {
        let e = parse("x1*C + x3", 3).unwrap();
        assert_eq!(e.dimension(), 3);
        assert!(e.mentions_param());
        assert!(!parse("x2", 2).unwrap().mentions_param());
    }

    #[test]
    fn compose_substitutes_first_coordinate() {
        let phi = parse_univariate("t^2 + 1").unwrap();
        let f = parse("x1 + x2", 2).unwrap();
        let composed = phi.compose(&f);
        assert_eq!(composed.eval(&[1.0, 2.0], None).unwrap(), 10.0);
    }
}
