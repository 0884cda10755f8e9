//! One-parameter plane families `a(x) C² + b(x) C + c(x) = 0` obtained by
//! clearing `f(x) = C` for a web function with at most one square root, and
//! their envelopes.
//!
//! A web function of the form `g²` where `g` carries the radical is cleared
//! as `g = C` instead; the family parameter then stands for `√(level)` and
//! [`PlaneFamily::param_is_square`] is set.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{Expr, Node, Poly, PolyError, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearKind {
    /// All planes share one normal direction.
    Parallel,
    /// All planes contain a common codimension-2 subspace.
    Pencil,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("unsupported web function shape: {0}")]
    Pattern(String),
    #[error("cleared family has degree {0} in C; at most 2 is supported")]
    DegreeTooHigh(u32),
    #[error("cleared equation does not involve C")]
    NotAFamily,
    #[error("family is linear in C ({0:?} planes) and has no envelope")]
    Linear(LinearKind),
    #[error("family members are not planes")]
    NotPlanar,
    #[error("envelope polynomial is constant")]
    DegenerateEnvelope,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `a C² + b C + c` with coefficients free of `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneFamily {
    pub a: Poly,
    pub b: Poly,
    pub c: Poly,
    /// `C`-free factors divided out of the cleared equation (rational
    /// content first).
    pub stripped: Vec<Poly>,
    pub param_is_square: bool,
}

fn param() -> Poly {
    Poly::var(Var::Param)
}

impl PlaneFamily {
    pub fn new(a: Poly, b: Poly, c: Poly) -> Self {
        PlaneFamily {
            a,
            b,
            c,
            stripped: Vec::new(),
            param_is_square: false,
        }
    }

    /// Splits a polynomial in `C` of degree at most 2.
    pub fn from_poly(p: &Poly) -> Result<Self, EnvelopeError> {
        let coeffs = p.coefficients_in(Var::Param);
        match coeffs.len() {
            0 | 1 => Err(EnvelopeError::NotAFamily),
            2 | 3 => {
                let get = |k: usize| coeffs.get(k).cloned().unwrap_or_else(Poly::zero);
                Ok(PlaneFamily::new(get(2), get(1), get(0)))
            }
            d => Err(EnvelopeError::DegreeTooHigh(d as u32 - 1)),
        }
    }

    pub fn degree(&self) -> u32 {
        if !self.a.is_zero() {
            2
        } else if !self.b.is_zero() {
            1
        } else {
            0
        }
    }

    pub fn polynomial(&self) -> Poly {
        let c = param();
        &(&(&self.a * &c.pow(2)) + &(&self.b * &c)) + &self.c
    }

    /// Every member is a hyperplane: each coefficient has degree ≤ 1 in `x`.
    pub fn is_planar(&self) -> bool {
        [&self.a, &self.b, &self.c]
            .iter()
            .all(|p| p.terms().all(|(m, _)| m.degree() <= 1))
    }

    /// Classifies a family linear in `C`.
    pub fn linear_kind(&self) -> Option<LinearKind> {
        if self.degree() != 1 {
            return None;
        }
        let n = self.dimension();
        let normal = |p: &Poly| -> Vec<BigRational> {
            (0..n).map(|i| p.derivative(Var::X(i)).as_constant().unwrap_or_else(BigRational::zero)).collect()
        };
        let (nb, nc) = (normal(&self.b), normal(&self.c));
        let proportional = (0..n).all(|i| (i..n).all(|j| &nb[i] * &nc[j] == &nb[j] * &nc[i]));
        Some(if proportional {
            LinearKind::Parallel
        } else {
            LinearKind::Pencil
        })
    }

    pub fn dimension(&self) -> usize {
        [&self.a, &self.b, &self.c]
            .iter()
            .flat_map(|p| p.terms().map(|(m, _)| m.clone()))
            .map(|m| {
                (0..64)
                    .rev()
                    .find(|&i| m.exponent(Var::X(i)) > 0)
                    .map_or(0, |i| i + 1)
            })
            .max()
            .unwrap_or(0)
    }

    /// Member `C = value` as `(normal, offset)` with `normal · x + offset = 0`.
    pub fn plane(&self, value: f64, n: usize) -> (Vec<f64>, f64) {
        let f = self.polynomial();
        let origin = vec![0.0; n];
        let normal = (0..n)
            .map(|i| f.derivative(Var::X(i)).eval(&origin, value))
            .collect();
        (normal, f.eval(&origin, value))
    }
}

/// `(p + a √q) / r` with polynomial `p, a, r`; `q` is shared per conversion.
#[derive(Clone, Debug)]
struct Radical {
    p: Poly,
    a: Poly,
    r: Poly,
}

impl Radical {
    fn rational(p: Poly) -> Self {
        Radical {
            p,
            a: Poly::zero(),
            r: Poly::int(1),
        }
    }
}

struct Clearing {
    q: Option<Poly>,
}

impl Clearing {
    fn q(&self) -> Poly {
        self.q.clone().unwrap_or_else(Poly::zero)
    }

    fn convert(&mut self, e: &Expr) -> Result<Radical, EnvelopeError> {
        Ok(match e.node() {
            Node::Const(_) | Node::Var(_) => Radical::rational(e.expand_to_poly()?),
            Node::Neg(x) => {
                let x = self.convert(x)?;
                Radical {
                    p: -&x.p,
                    a: -&x.a,
                    r: x.r,
                }
            }
            Node::Add(x, y) | Node::Sub(x, y) => {
                let (x, y) = (self.convert(x)?, self.convert(y)?);
                let sign = if matches!(e.node(), Node::Sub(..)) {
                    Poly::int(-1)
                } else {
                    Poly::int(1)
                };
                Radical {
                    p: &(&x.p * &y.r) + &(&sign * &(&y.p * &x.r)),
                    a: &(&x.a * &y.r) + &(&sign * &(&y.a * &x.r)),
                    r: &x.r * &y.r,
                }
            }
            Node::Mul(x, y) => {
                let (x, y) = (self.convert(x)?, self.convert(y)?);
                self.mul(&x, &y)
            }
            Node::Pow(x, k) => {
                let x = self.convert(x)?;
                (0..*k).fold(Radical::rational(Poly::int(1)), |acc, _| self.mul(&acc, &x))
            }
            Node::Div(x, y) => {
                let (x, y) = (self.convert(x)?, self.convert(y)?);
                if y.a.is_zero() {
                    Radical {
                        p: &x.p * &y.r,
                        a: &x.a * &y.r,
                        r: &x.r * &y.p,
                    }
                } else {
                    // Multiply through by the conjugate of the denominator.
                    let conj = Radical {
                        p: y.p.clone(),
                        a: -&y.a,
                        r: Poly::int(1),
                    };
                    let num = self.mul(&x, &conj);
                    let norm = &(&y.p * &y.p) - &(&(&y.a * &y.a) * &self.q());
                    Radical {
                        p: &num.p * &y.r,
                        a: &num.a * &y.r,
                        r: &norm * &x.r,
                    }
                }
            }
            Node::Sqrt(x) => {
                let inner = self.convert(x)?;
                if !inner.a.is_zero() {
                    return Err(EnvelopeError::Pattern("nested square roots".into()));
                }
                // √(P/R) = √(P R) / R
                let radicand = &inner.p * &inner.r;
                match &self.q {
                    Some(q) if *q != radicand => {
                        return Err(EnvelopeError::Pattern("more than one distinct square root".into()))
                    }
                    _ => self.q = Some(radicand),
                }
                Radical {
                    p: Poly::zero(),
                    a: Poly::int(1),
                    r: inner.r,
                }
            }
        })
    }

    fn mul(&self, x: &Radical, y: &Radical) -> Radical {
        Radical {
            p: &(&x.p * &y.p) + &(&(&x.a * &y.a) * &self.q()),
            a: &(&x.p * &y.a) + &(&x.a * &y.p),
            r: &x.r * &y.r,
        }
    }
}

/// Divides out `C`-free factors: rational content, powers of single
/// coordinates, then `candidates` as often as they divide.
fn strip_factors(mut p: Poly, candidates: &[Poly]) -> (Poly, Vec<Poly>) {
    let mut stripped = Vec::new();
    let content = p.content();
    let sign = p.leading().map(|(_, c)| c.is_negative()).unwrap_or(false);
    let unit = if sign { -content } else { content };
    if !unit.is_one() {
        p = p.scale(&unit.recip());
        stripped.push(Poly::constant(unit));
    }
    let n = p.terms().flat_map(|(m, _)| (0..64).filter(move |&i| m.exponent(Var::X(i)) > 0)).max().map_or(0, |i| i + 1);
    for i in 0..n {
        let x = Poly::var(Var::X(i));
        while let Some(q) = p.div_exact(&x) {
            p = q;
            stripped.push(x.clone());
        }
    }
    for cand in candidates {
        if cand.as_constant().is_some() || cand.degree_in(Var::Param) > 0 {
            continue;
        }
        let cand = cand.normalized();
        while let Some(q) = p.div_exact(&cand) {
            if q.degree_in(Var::Param) == 0 {
                break;
            }
            p = q;
            stripped.push(cand.clone());
        }
    }
    (p, stripped)
}

/// Clears `f = C` to a polynomial family. Supports rational functions with
/// at most one distinct square root, and squares of those (cleared through
/// the square root of the level, see the module docs).
pub fn family_from_web_function(f: &Expr) -> Result<PlaneFamily, EnvelopeError> {
    if f.mentions_param() {
        return Err(EnvelopeError::Pattern("web function must not mention C".into()));
    }
    let (target, param_is_square) = match f.node() {
        Node::Pow(g, 2) if g.has_sqrt() => (g.clone(), true),
        _ => (f.clone(), false),
    };
    let mut clearing = Clearing { q: None };
    let form = clearing.convert(&target)?;
    let q = clearing.q();
    // r C − p = a √q
    let lhs = &(&form.r * &param()) - &form.p;
    let cleared = if form.a.is_zero() || q.is_zero() {
        lhs
    } else {
        &(&lhs * &lhs) - &(&(&form.a * &form.a) * &q)
    };
    if cleared.is_zero() {
        return Err(EnvelopeError::Pattern("cleared equation vanishes identically".into()));
    }
    let (poly, stripped) = strip_factors(cleared, &[form.r.clone(), form.a.clone()]);
    let mut family = PlaneFamily::from_poly(&poly)?;
    family.stripped = stripped;
    family.param_is_square = param_is_square;
    Ok(family)
}

/// Envelope of a quadratic family: the discriminant `b² − 4ac`, i.e. the
/// elimination of `C` from `F = 0, ∂F/∂C = 0`.
pub fn envelope_of(family: &PlaneFamily) -> Result<Poly, EnvelopeError> {
    match family.degree() {
        2 => Ok(&(&family.b * &family.b) - (&(&family.a * &family.c).scale(&BigRational::from_integer(4.into())))),
        1 => Err(EnvelopeError::Linear(family.linear_kind().expect("degree 1"))),
        _ => Err(EnvelopeError::NotAFamily),
    }
}

/// Whether two polynomials define the same hypersurface up to a nonzero
/// rational factor.
pub fn same_equation(a: &Poly, b: &Poly) -> bool {
    a.normalized() == b.normalized()
}

/// One characteristic point found on a family member.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangencySample {
    pub parameter: f64,
    pub point: Vec<f64>,
    /// `|F(x, C)|`.
    pub plane_residual: f64,
    /// `|env(x)|`.
    pub envelope_residual: f64,
    /// `|n̂ × ∇env/|∇env||`, the sine of the angle between the plane normal
    /// and the envelope normal.
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangencyReport {
    pub samples: Vec<TangencySample>,
    /// Parameter values where no characteristic point was found, with the
    /// reason.
    pub misses: Vec<(f64, String)>,
    pub max_residual: f64,
    pub max_defect: f64,
    pub pass: bool,
}

/// Tolerances of [`verify_tangency`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangencyOptions {
    pub parameter_range: (f64, f64),
    pub seed: u64,
    /// Bound on `|F|` and `|env|` at found points.
    pub residual_tolerance: f64,
    /// Bound on the normal-parallelism defect.
    pub defect_tolerance: f64,
}

impl Default for TangencyOptions {
    fn default() -> Self {
        TangencyOptions {
            parameter_range: (0.5, 2.0),
            seed: crate::sampling::DEFAULT_SEED,
            residual_tolerance: 1e-10,
            defect_tolerance: 1e-8,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Independent check of an envelope: for seeded parameter values, a point of
/// the member plane where `∂F/∂C = 0` is located by root-finding along a
/// random line in the plane; there `env` must vanish and the envelope's
/// normal must be parallel to the plane's.
pub fn verify_tangency(
    family: &PlaneFamily,
    envelope: &Poly,
    n: usize,
    samples: usize,
    opts: &TangencyOptions,
) -> Result<TangencyReport, EnvelopeError> {
    if envelope.as_constant().is_some() {
        return Err(EnvelopeError::DegenerateEnvelope);
    }
    if !family.is_planar() {
        return Err(EnvelopeError::NotPlanar);
    }
    let f = family.polynomial();
    let df_dc = f.derivative(Var::Param);
    let env_grad: Vec<Poly> = (0..n).map(|i| envelope.derivative(Var::X(i))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    let mut misses = Vec::new();
    for _ in 0..samples {
        let c = rng.random_range(opts.parameter_range.0..opts.parameter_range.1);
        let (normal, offset) = family.plane(c, n);
        let nn = dot(&normal, &normal);
        if nn == 0.0 {
            misses.push((c, "degenerate member".to_string()));
            continue;
        }
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lift = (dot(&normal, &raw) + offset) / nn;
        let x0: Vec<f64> = raw.iter().zip(&normal).map(|(x, m)| x - lift * m).collect();
        let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let along = dot(&normal, &dir) / nn;
        let w: Vec<f64> = dir.iter().zip(&normal).map(|(d, m)| d - along * m).collect();
        let at = |t: f64| -> Vec<f64> { x0.iter().zip(&w).map(|(x, d)| x + t * d).collect() };
        let g = |t: f64| df_dc.eval(&at(t), c);
        // ∂F/∂C is affine along the line; a secant solve is exact up to
        // rounding, a few refinements absorb it.
        let (mut t0, mut t1) = (0.0, 1.0);
        let (mut g0, mut g1) = (g(t0), g(t1));
        let mut found = None;
        for _ in 0..8 {
            if g1 == g0 {
                break;
            }
            let t2 = t1 - g1 * (t1 - t0) / (g1 - g0);
            (t0, g0) = (t1, g1);
            t1 = t2;
            g1 = g(t1);
            if g1.abs() <= 1e-14 * (1.0 + t1.abs()) {
                found = Some(t1);
                break;
            }
        }
        let Some(t) = found.or((g1.abs() <= 1e-12).then_some(t1)) else {
            misses.push((c, "characteristic not met by the sampled line".to_string()));
            continue;
        };
        let x = at(t);
        let grad: Vec<f64> = env_grad.iter().map(|p| p.eval(&x, 0.0)).collect();
        let gg = dot(&grad, &grad);
        if gg == 0.0 {
            misses.push((c, "envelope singular at the characteristic point".to_string()));
            continue;
        }
        let mut wedge = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                wedge += (grad[i] * normal[j] - grad[j] * normal[i]).powi(2);
            }
        }
        out.push(TangencySample {
            parameter: c,
            plane_residual: f.eval(&x, c).abs(),
            envelope_residual: envelope.eval(&x, 0.0).abs(),
            defect: (wedge / (gg * nn)).sqrt(),
            point: x,
        });
    }
    let max_residual = out
        .iter()
        .map(|s| s.plane_residual.max(s.envelope_residual))
        .fold(0.0, f64::max);
    let max_defect = out.iter().map(|s| s.defect).fold(0.0, f64::max);
    let pass = !out.is_empty()
        && max_residual <= opts.residual_tolerance
        && max_defect <= opts.defect_tolerance;
    Ok(TangencyReport {
        samples: out,
        misses,
        max_residual,
        max_defect,
        pass,
    })
}

/// Numeric value of a rational coefficient, for display.
pub fn approx(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}
