//! Multivariate polynomials with exact rational coefficients over `x1..xn`
//! and the parameter `C`, kept in canonical form (graded lexicographic
//! monomial order, no zero coefficients), so two polynomials are equal iff
//! their coefficient tables are equal.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::{Constant, Expr, Node, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("expression is not polynomial: {0}")]
    NotPolynomial(String),
}

/// Exponents of `x1..xn` (trailing zeros trimmed) and of `C`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    x: Vec<u32>,
    c: u32,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn of(var: Var) -> Self {
        let mut m = Monomial::one();
        match var {
            Var::X(i) => {
                m.x = vec![0; i + 1];
                m.x[i] = 1;
            }
            Var::Param => m.c = 1,
        }
        m
    }

    pub fn degree(&self) -> u32 {
        self.x.iter().sum::<u32>() + self.c
    }

    pub fn exponent(&self, var: Var) -> u32 {
        match var {
            Var::X(i) => self.x.get(i).copied().unwrap_or(0),
            Var::Param => self.c,
        }
    }

    fn trimmed(mut self) -> Self {
        while self.x.last() == Some(&0) {
            self.x.pop();
        }
        self
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let len = self.x.len().max(other.x.len());
        let x = (0..len)
            .map(|i| self.x.get(i).unwrap_or(&0) + other.x.get(i).unwrap_or(&0))
            .collect();
        Monomial { x, c: self.c + other.c }.trimmed()
    }

    fn divides(&self, other: &Monomial) -> bool {
        self.c <= other.c
            && self
                .x
                .iter()
                .enumerate()
                .all(|(i, e)| *e <= other.x.get(i).copied().unwrap_or(0))
    }

    /// `other / self`; caller guarantees divisibility.
    fn quotient_of(&self, other: &Monomial) -> Monomial {
        let x = other
            .x
            .iter()
            .enumerate()
            .map(|(i, e)| e - self.x.get(i).copied().unwrap_or(0))
            .collect();
        Monomial { x, c: other.c - self.c }.trimmed()
    }

    fn gcd(&self, other: &Monomial) -> Monomial {
        let x = self
            .x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| *a.min(b))
            .collect();
        Monomial { x, c: self.c.min(other.c) }.trimmed()
    }

    fn without(&self, var: Var) -> Monomial {
        let mut m = self.clone();
        match var {
            Var::X(i) => {
                if i < m.x.len() {
                    m.x[i] = 0;
                }
            }
            Var::Param => m.c = 0,
        }
        m.trimmed()
    }

    fn eval(&self, point: &[f64], param: f64) -> f64 {
        let mut v = param.powi(self.c as i32);
        for (i, e) in self.x.iter().enumerate() {
            if *e > 0 {
                v *= point.get(i).copied().unwrap_or(0.0).powi(*e as i32);
            }
        }
        v
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let len = self.x.len().max(other.x.len());
            (0..len)
                .map(|i| {
                    let a = self.x.get(i).copied().unwrap_or(0);
                    let b = other.x.get(i).copied().unwrap_or(0);
                    a.cmp(&b)
                })
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
                .then(self.c.cmp(&other.c))
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut factors = Vec::new();
        for (i, e) in self.x.iter().enumerate() {
            match e {
                0 => {}
                1 => factors.push(format!("x{}", i + 1)),
                _ => factors.push(format!("x{}^{}", i + 1, e)),
            }
        }
        match self.c {
            0 => {}
            1 => factors.push("C".into()),
            e => factors.push(format!("C^{e}")),
        }
        if factors.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&factors.join("*"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(value: BigRational) -> Self {
        Poly::term(Monomial::one(), value)
    }

    pub fn int(value: i64) -> Self {
        Poly::constant(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn var(var: Var) -> Self {
        Poly::term(Monomial::of(var), BigRational::one())
    }

    pub fn term(monomial: Monomial, coefficient: BigRational) -> Self {
        let mut p = Poly::zero();
        p.add_term(monomial, coefficient);
        p
    }

    fn add_term(&mut self, monomial: Monomial, coefficient: BigRational) {
        if coefficient.is_zero() {
            return;
        }
        let monomial = monomial.trimmed();
        let entry = self.terms.entry(monomial.clone()).or_insert_with(BigRational::zero);
        *entry += coefficient;
        if entry.is_zero() {
            self.terms.remove(&monomial);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant value, if the polynomial has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().expect("one term");
                (m.degree() == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter().rev()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of `monomial` (zero if absent).
    pub fn coefficient(&self, monomial: &Monomial) -> BigRational {
        self.terms.get(monomial).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn degree_in(&self, var: Var) -> u32 {
        self.terms.keys().map(|m| m.exponent(var)).max().unwrap_or(0)
    }

    /// Splits `self = Σ_k coeff_k · var^k` and returns `coeff_0..coeff_deg`.
    pub fn coefficients_in(&self, var: Var) -> Vec<Poly> {
        let mut out = vec![Poly::zero(); self.degree_in(var) as usize + 1];
        for (m, c) in &self.terms {
            out[m.exponent(var) as usize].add_term(m.without(var), c.clone());
        }
        out
    }

    pub fn pow(&self, exponent: u32) -> Poly {
        let mut out = Poly::int(1);
        for _ in 0..exponent {
            out = &out * self;
        }
        out
    }

    pub fn scale(&self, factor: &BigRational) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * factor);
        }
        out
    }

    pub fn derivative(&self, var: Var) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(var);
            if e == 0 {
                continue;
            }
            let mut reduced = m.clone();
            match var {
                Var::X(i) => reduced.x[i] -= 1,
                Var::Param => reduced.c -= 1,
            }
            out.add_term(reduced, c * BigRational::from_integer(BigInt::from(e)));
        }
        out
    }

    /// Substitutes `var := value`.
    pub fn substitute(&self, var: Var, value: &Poly) -> Poly {
        self.coefficients_in(var)
            .iter()
            .rev()
            .fold(Poly::zero(), |acc, coeff| &(&acc * value) + coeff)
    }

    pub fn eval(&self, point: &[f64], param: f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c.to_f64().unwrap_or(f64::NAN) * m.eval(point, param))
            .sum()
    }

    /// Rational content: positive gcd of the coefficients, so that
    /// `self / content` has coprime integer coefficients.
    pub fn content(&self) -> BigRational {
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            num_gcd = num_gcd.gcd(c.numer());
            den_lcm = den_lcm.lcm(c.denom());
        }
        if num_gcd.is_zero() {
            return BigRational::one();
        }
        BigRational::new(num_gcd, den_lcm)
    }

    /// Largest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        it.fold(first.clone(), |acc, m| acc.gcd(m))
    }

    /// Primitive representative with positive leading coefficient: the
    /// canonical form of the equation `self = 0` up to a nonzero scalar.
    pub fn normalized(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut scale = self.content().recip();
        if self.leading().expect("nonzero").1.is_negative() {
            scale = -scale;
        }
        self.scale(&scale)
    }

    /// Divides by a monomial that divides every term.
    pub fn div_monomial(&self, m: &Monomial) -> Option<Poly> {
        let mut out = Poly::zero();
        for (t, c) in &self.terms {
            if !m.divides(t) {
                return None;
            }
            out.add_term(m.quotient_of(t), c.clone());
        }
        Some(out)
    }

    /// Exact division; `None` if `divisor` does not divide `self`.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        let (lead_m, lead_c) = divisor.leading()?;
        let mut rem = self.clone();
        let mut quotient = Poly::zero();
        while let Some((m, c)) = rem.leading() {
            if !lead_m.divides(m) {
                return None;
            }
            let t = Poly::term(lead_m.quotient_of(m), c / lead_c);
            rem = &rem - &(&t * divisor);
            quotient = &quotient + &t;
        }
        Some(quotient)
    }

    pub fn to_expr(&self) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in self.terms() {
            let mut term = Expr::exact(c.clone());
            for (i, e) in m.x.iter().enumerate() {
                if *e > 0 {
                    term = term.mul(&Expr::var(i).powi(*e));
                }
            }
            if m.c > 0 {
                term = term.mul(&Expr::param().powi(m.c));
            }
            out = out.add(&term);
        }
        out
    }
}

fn binary_terms(a: &Poly, b: &Poly, negate: bool) -> Poly {
    let mut out = a.clone();
    for (m, c) in &b.terms {
        out.add_term(m.clone(), if negate { -c.clone() } else { c.clone() });
    }
    out
}

impl ops::Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        binary_terms(self, rhs, false)
    }
}

impl ops::Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        binary_terms(self, rhs, true)
    }
}

impl ops::Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl ops::Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(&-BigRational::one())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms().enumerate() {
            let negative = c.is_negative();
            let magnitude = c.abs();
            match (k, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let coeff = if magnitude.is_integer() {
                magnitude.numer().to_string()
            } else {
                format!("{}/{}", magnitude.numer(), magnitude.denom())
            };
            if m.degree() == 0 {
                f.write_str(&coeff)?;
            } else if magnitude.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{coeff}*{m}")?;
            }
        }
        Ok(())
    }
}

impl Expr {
    /// Expands a radical-free expression whose divisions are by nonzero
    /// constants into canonical polynomial form. Decimal literals are
    /// converted using their exact binary value.
    pub fn expand_to_poly(&self) -> Result<Poly, PolyError> {
        Ok(match self.node() {
            Node::Const(Constant::Rational { exact, .. }) => Poly::constant(exact.clone()),
            Node::Const(Constant::Float(v)) => Poly::constant(
                BigRational::from_float(*v)
                    .ok_or_else(|| PolyError::NotPolynomial(format!("non-finite literal {v}")))?,
            ),
            Node::Var(v) => Poly::var(*v),
            Node::Neg(a) => -&a.expand_to_poly()?,
            Node::Add(a, b) => &a.expand_to_poly()? + &b.expand_to_poly()?,
            Node::Sub(a, b) => &a.expand_to_poly()? - &b.expand_to_poly()?,
            Node::Mul(a, b) => &a.expand_to_poly()? * &b.expand_to_poly()?,
            Node::Pow(a, n) => a.expand_to_poly()?.pow(*n),
            Node::Div(a, b) => {
                let den = b.expand_to_poly()?;
                match den.as_constant() {
                    Some(d) if !d.is_zero() => a.expand_to_poly()?.scale(&d.recip()),
                    _ => {
                        return Err(PolyError::NotPolynomial(format!(
                            "division by non-constant {b}"
                        )))
                    }
                }
            }
            Node::Sqrt(a) => return Err(PolyError::NotPolynomial(format!("sqrt({a})"))),
        })
    }
}
