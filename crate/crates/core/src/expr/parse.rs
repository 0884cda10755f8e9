//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' INTEGER)*
//! primary := NUMBER | 'x' INTEGER | 'C' | 'sqrt' '(' expr ')' | '(' expr ')'
//! NUMBER  := DIGITS ['.' DIGITS] [('e' | 'E') ['+' | '-'] DIGITS]
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`. Integer
//! literals and ratios of integer literals stay exact; literals with a decimal
//! point or exponent are doubles. A negated literal and a quotient of two exact
//! literals are folded into a single constant, which is what the printer emits.

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use super::{Constant, Expr, Node};

/// Name of the single variable in univariate expressions (`u0`, `Ψ_s`).
pub const UNIVARIATE_NAME: &str = "t";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("variable x{index} at position {position} is outside x1..x{dimension}")]
    VariableOutOfRange {
        index: usize,
        dimension: usize,
        position: usize,
    },
    #[error("division by constant zero at position {position}")]
    ZeroDenominator { position: usize },
}

#[derive(Clone, Copy)]
enum Scope {
    Coordinates(usize),
    Univariate,
}

/// Parses `text` as an expression in `x1..xn` and `C`.
pub fn parse(text: &str, n: usize) -> Result<Expr, ParseError> {
    Parser::new(text, Scope::Coordinates(n)).run()
}

/// Parses a one-variable expression written in `t`; `t` becomes coordinate 0
/// so the result can be evaluated at `[t]` or composed via [`Expr::compose`].
pub fn parse_univariate(text: &str) -> Result<Expr, ParseError> {
    Parser::new(text, Scope::Univariate).run()
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(Constant),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    tok: Token,
    tok_pos: usize,
    scope: Scope,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, scope: Scope) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
            tok: Token::End,
            tok_pos: 0,
            scope,
        }
    }

    fn run(mut self) -> Result<Expr, ParseError> {
        self.advance()?;
        let e = self.expr()?;
        if self.tok != Token::End {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(e)
    }

    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            position: self.tok_pos,
            message: message.to_string(),
        }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_pos = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            self.tok = Token::End;
            return Ok(());
        };
        self.tok = match c {
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'^' => Token::Caret,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' | b'.' => return self.number(),
            c if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                self.tok = Token::Ident(word.to_string());
                return Ok(());
            }
            _ => {
                return Err(ParseError::Syntax {
                    position: self.pos,
                    message: format!("unexpected character '{}'", c as char),
                })
            }
        };
        self.pos += 1;
        Ok(())
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.pos - start
    }

    fn number(&mut self) -> Result<(), ParseError> {
        let start = self.pos;
        let int_digits = self.digits();
        let mut is_float = false;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            is_float = true;
            if self.digits() == 0 && int_digits == 0 {
                return Err(ParseError::Syntax {
                    position: start,
                    message: "malformed number".into(),
                });
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                self.pos = mark;
            } else {
                is_float = true;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let constant = if is_float {
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                position: start,
                message: format!("malformed number '{text}'"),
            })?;
            Constant::Float(v)
        } else {
            let v: BigInt = text.parse().expect("digits");
            Constant::rational(BigRational::from_integer(v))
        };
        self.tok = Token::Number(constant);
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let ctor: fn(Expr, Expr) -> Node = match self.tok {
                Token::Plus => Node::Add,
                Token::Minus => Node::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Expr::from_node(ctor(lhs, rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Token::Star => {
                    self.advance()?;
                    let rhs = self.unary()?;
                    lhs = Expr::from_node(Node::Mul(lhs, rhs));
                }
                Token::Slash => {
                    let position = self.tok_pos;
                    self.advance()?;
                    let rhs = self.unary()?;
                    lhs = fold_division(lhs, rhs, position)?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Token::Minus {
            self.advance()?;
            let inner = self.unary()?;
            return Ok(match inner.node() {
                Node::Const(c) => Expr::constant(c.neg()),
                _ => Expr::from_node(Node::Neg(inner)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.primary()?;
        while self.tok == Token::Caret {
            self.advance()?;
            let exponent = match &self.tok {
                Token::Number(Constant::Rational { exact, .. }) if exact.is_integer() => exact
                    .numer()
                    .try_into()
                    .map_err(|_| self.error("exponent too large"))?,
                Token::Minus => return Err(self.error("negative exponents are not supported")),
                _ => return Err(self.error("exponent must be a non-negative integer literal")),
            };
            self.advance()?;
            base = Expr::from_node(Node::Pow(base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let position = self.tok_pos;
        match std::mem::replace(&mut self.tok, Token::End) {
            Token::Number(c) => {
                self.advance()?;
                Ok(Expr::constant(c))
            }
            Token::LParen => {
                self.advance()?;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Token::Ident(word) => {
                self.advance()?;
                self.identifier(&word, position)
            }
            other => {
                self.tok = other;
                Err(self.error("expected a number, variable, function or '('"))
            }
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.tok != Token::RParen {
            return Err(self.error("expected ')'"));
        }
        self.advance()
    }

    fn identifier(&mut self, word: &str, position: usize) -> Result<Expr, ParseError> {
        if word == "sqrt" {
            if self.tok != Token::LParen {
                return Err(self.error("expected '(' after sqrt"));
            }
            self.advance()?;
            let arg = self.expr()?;
            self.expect_rparen()?;
            return Ok(Expr::from_node(Node::Sqrt(arg)));
        }
        let unknown = || ParseError::Syntax {
            position,
            message: format!("unknown identifier '{word}'"),
        };
        match self.scope {
            Scope::Univariate if word == UNIVARIATE_NAME => Ok(Expr::var(0)),
            Scope::Univariate => Err(unknown()),
            Scope::Coordinates(_) if word == "C" => Ok(Expr::param()),
            Scope::Coordinates(dimension) => {
                let digits = word.strip_prefix('x').ok_or_else(unknown)?;
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(unknown());
                }
                let index: usize = digits.parse().map_err(|_| unknown())?;
                if index == 0 || index > dimension {
                    return Err(ParseError::VariableOutOfRange {
                        index,
                        dimension,
                        position,
                    });
                }
                Ok(Expr::var(index - 1))
            }
        }
    }
}

fn fold_division(num: Expr, den: Expr, position: usize) -> Result<Expr, ParseError> {
    let den_zero = match den.as_constant() {
        Some(c) => c.is_zero(),
        None => den.exact_value().is_some_and(|v| num_traits::Zero::is_zero(&v)),
    };
    if den_zero {
        return Err(ParseError::ZeroDenominator { position });
    }
    if let (
        Some(Constant::Rational { exact: a, .. }),
        Some(Constant::Rational { exact: b, .. }),
    ) = (num.as_constant(), den.as_constant())
    {
        return Ok(Expr::exact(a / b));
    }
    Ok(Expr::from_node(Node::Div(num, den)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_expected_tree() {
        let e = parse("x1*x2 + 3", 2).unwrap();
        let expected = Expr::from_node(Node::Add(
            Expr::from_node(Node::Mul(Expr::var(0), Expr::var(1))),
            Expr::int(3),
        ));
        assert_eq!(e, expected);
    }

    #[test]
    fn parses_radicand_of_cylinder_example() {
        let e = parse("sqrt(1 - 4*x2*(x1+x3))", 3).unwrap();
        assert!(matches!(e.node(), Node::Sqrt(_)));
        assert!((e.eval_at(&[0.1, 0.5, 0.1]).unwrap() - 0.6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_variables() {
        assert!(matches!(
            parse("x0 + 1", 3),
            Err(ParseError::VariableOutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            parse("x4", 3),
            Err(ParseError::VariableOutOfRange { index: 4, .. })
        ));
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        let e = parse("-x1^2", 1).unwrap();
        assert_eq!(e.eval_at(&[3.0]).unwrap(), -9.0);
        let e = parse("-2^2", 1).unwrap();
        assert_eq!(e.eval_at(&[0.0]).unwrap(), -4.0);
    }

    #[test]
    fn multiplication_is_left_associative() {
        let e = parse("x1/x2*x3", 3).unwrap();
        assert_eq!(e.eval_at(&[6.0, 2.0, 3.0]).unwrap(), 9.0);
        let e = parse("x1 - x2 - x3", 3).unwrap();
        assert_eq!(e.eval_at(&[6.0, 2.0, 3.0]).unwrap(), 1.0);
    }

    #[test]
    fn exact_ratios_and_decimals() {
        let e = parse("1/3", 1).unwrap();
        assert_eq!(e.exact_value().unwrap(), BigRational::new(1.into(), 3.into()));
        let e = parse("0.25", 1).unwrap();
        assert!(matches!(e.as_constant(), Some(Constant::Float(v)) if *v == 0.25));
        let e = parse("1.5e-3", 1).unwrap();
        assert_eq!(e.eval_at(&[]).unwrap(), 1.5e-3);
    }

    #[test]
    fn reports_syntax_errors_with_position() {
        match parse("x1 + * x2", 2) {
            Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("(x1 + x2", 2).is_err());
        assert!(parse("x1^-2", 1).is_err());
        assert!(parse("x1^x2", 2).is_err());
        assert!(parse("y1", 2).is_err());
        assert!(parse("x1 / (2 - 2)", 1).is_err());
    }

    #[test]
    fn univariate_scope_uses_t() {
        let e = parse_univariate("t^2 + 1").unwrap();
        assert_eq!(e.eval_at(&[3.0]).unwrap(), 10.0);
        assert!(parse_univariate("x1").is_err());
    }
}
