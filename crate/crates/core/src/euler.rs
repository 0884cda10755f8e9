//! Hyperplanar web functions from the implicit Euler-type solution
//!
//! ```text
//! f = u0(x_n + Ψ_{n−1}(f) x_{n−1} + … + Ψ_1(f) x_1)
//! ```
//!
//! and the first-order facts behind it: the Euler system
//! `∂f/∂x_s = Ψ_s(f) ∂f/∂x_n`, the ratios `A_s = f_s / f_{s+1}` and the
//! vector fields `X_s = ∂_s − A_s ∂_{s+1}`.
//!
//! `u0` and every `Ψ_s` are one-variable expressions in `t`.

use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::field::{FieldError, Jet, ScalarField, WebFunction};
use crate::report::{CheckOptions, CheckSummary, ResidualStats, SampleStatus};
use crate::sampling::SamplePlan;
use crate::webcheck::level_set_tangent;

pub const DEFAULT_MAX_ITERATIONS: usize = 200;
pub const DEFAULT_SOLVER_TOLERANCE: f64 = 1e-12;
/// Smallest damping factor tried before a step is rejected.
pub const DAMPING_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EulerError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("Psi_{index} vanishes at t = {at}")]
    VanishingPsi { index: usize, at: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no convergence after {iterations} iterations (defect {defect:e})")]
    NoConvergence { iterations: usize, defect: f64 },
    #[error("Newton derivative singular and fixed-point iteration divergent at f = {at}")]
    Stalled { at: f64 },
    #[error("implicit-function derivative singular (dF/df = {0:e})")]
    Fold(f64),
}

impl From<EulerError> for FieldError {
    fn from(e: EulerError) -> Self {
        match e {
            EulerError::Eval(e) => FieldError::Eval(e),
            other => FieldError::Solve(other.to_string()),
        }
    }
}

/// Initial condition and the `n − 1` functions `Ψ_s`.
#[derive(Clone, Debug)]
pub struct EulerSpec {
    u0: Expr,
    psi: Vec<Expr>,
    n: usize,
    /// `F(x, f) = f − u0(·)` in `n + 1` variables; `f` is the last one.
    implicit: Expr,
    implicit_grad: Vec<Expr>,
    implicit_hess: Vec<Vec<Expr>>,
}

fn check_univariate(e: &Expr, what: &str) -> Result<(), EulerError> {
    if e.dimension() > 1 || e.mentions_param() {
        return Err(EulerError::InvalidSpec(format!("{what} must be an expression in t")));
    }
    Ok(())
}

impl EulerSpec {
    pub fn new(u0: Expr, psi: Vec<Expr>, n: usize) -> Result<Self, EulerError> {
        if n < 2 {
            return Err(EulerError::InvalidSpec("dimension must be at least 2".into()));
        }
        if psi.len() != n - 1 {
            return Err(EulerError::InvalidSpec(format!(
                "expected {} Psi functions, got {}",
                n - 1,
                psi.len()
            )));
        }
        check_univariate(&u0, "u0")?;
        for (s, p) in psi.iter().enumerate() {
            check_univariate(p, &format!("Psi_{}", s + 1))?;
        }
        let f = Expr::var(n);
        let mut arg = Expr::var(n - 1);
        for (s, p) in psi.iter().enumerate() {
            arg = arg + p.compose(&f) * Expr::var(s);
        }
        let implicit = &f - &u0.compose(&arg);
        let implicit_grad = implicit.gradient(n + 1);
        let implicit_hess = implicit.hessian(n + 1);
        Ok(EulerSpec {
            u0,
            psi,
            n,
            implicit,
            implicit_grad,
            implicit_hess,
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn u0(&self) -> &Expr {
        &self.u0
    }

    pub fn psi(&self) -> &[Expr] {
        &self.psi
    }

    /// `F(x, f) = f − u0(x_n + Σ Ψ_s(f) x_s)`, with `f` as coordinate `n + 1`.
    pub fn implicit_equation(&self) -> &Expr {
        &self.implicit
    }

    /// Samples every `Ψ_s` at `samples` evenly spaced values of `t` in
    /// `range`; an evaluation failure or `|Ψ_s| ≤ 1e-12` is an error.
    pub fn check_nonvanishing(&self, range: (f64, f64), samples: usize) -> Result<(), EulerError> {
        let samples = samples.max(2);
        for k in 0..samples {
            let t = range.0 + (range.1 - range.0) * k as f64 / (samples - 1) as f64;
            for (s, p) in self.psi.iter().enumerate() {
                if p.eval_at(&[t])?.abs() <= 1e-12 {
                    return Err(EulerError::VanishingPsi { index: s + 1, at: t });
                }
            }
        }
        Ok(())
    }

    fn extended(point: &[f64], f: f64) -> Vec<f64> {
        let mut ext = point.to_vec();
        ext.push(f);
        ext
    }

    /// Signed defect `F(p, f)`.
    pub fn defect(&self, point: &[f64], f: f64) -> Result<f64, EvalError> {
        self.implicit.eval_at(&Self::extended(point, f))
    }

    fn slope(&self, point: &[f64], f: f64) -> Result<f64, EvalError> {
        self.implicit_grad[self.n].eval_at(&Self::extended(point, f))
    }

    fn check_point(&self, point: &[f64]) -> Result<(), EulerError> {
        if point.len() != self.n {
            return Err(EulerError::InvalidSpec(format!(
                "point has {} coordinates, spec dimension is {}",
                point.len(),
                self.n
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: DEFAULT_SOLVER_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// A converged solve with its metadata.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Solution {
    pub value: f64,
    pub iterations: usize,
    pub defect: f64,
}

/// Solves the implicit equation at `point` from `guess` with default options.
pub fn implicit_solve(spec: &EulerSpec, point: &[f64], guess: f64) -> Result<f64, EulerError> {
    solve_with(spec, point, guess, &SolverOptions::default()).map(|s| s.value)
}

/// Damped Newton on `F(f) = f − u0(·)`: the step is halved until the defect
/// decreases, down to [`DAMPING_FLOOR`]. When that fails (or `F'` vanishes),
/// a damped fixed-point step `f ← f − ω F(f)` is tried the same way.
/// Converged once `|F| ≤ tol · (1 + |f|)`, followed by one polishing Newton
/// step that is kept only if it does not increase the defect.
pub fn solve_with(
    spec: &EulerSpec,
    point: &[f64],
    guess: f64,
    opts: &SolverOptions,
) -> Result<Solution, EulerError> {
    spec.check_point(point)?;
    let mut f = guess;
    let mut r = spec.defect(point, f)?;
    let try_damped = |f: f64, r: f64, dir: f64| -> Option<(f64, f64)> {
        let mut lambda = 1.0;
        while lambda >= DAMPING_FLOOR {
            let cand = f + lambda * dir;
            if let Ok(rc) = spec.defect(point, cand) {
                if rc.abs() < r.abs() {
                    return Some((cand, rc));
                }
            }
            lambda /= 2.0;
        }
        None
    };
    for it in 0..=opts.max_iterations {
        if r.abs() <= opts.tolerance * (1.0 + f.abs()) {
            if let Ok(d) = spec.slope(point, f) {
                if d != 0.0 {
                    let cand = f - r / d;
                    if let Ok(rc) = spec.defect(point, cand) {
                        if rc.abs() <= r.abs() {
                            f = cand;
                            r = rc;
                        }
                    }
                }
            }
            return Ok(Solution {
                value: f,
                iterations: it,
                defect: r.abs(),
            });
        }
        if it == opts.max_iterations {
            break;
        }
        let newton = match spec.slope(point, f) {
            Ok(d) if d.is_finite() && d.abs() > f64::EPSILON => try_damped(f, r, -r / d),
            _ => None,
        };
        match newton.or_else(|| try_damped(f, r, -r)) {
            Some((nf, nr)) => {
                f = nf;
                r = nr;
            }
            None => return Err(EulerError::Stalled { at: f }),
        }
    }
    Err(EulerError::NoConvergence {
        iterations: opts.max_iterations,
        defect: r.abs(),
    })
}

/// Solves along `points` in order, seeding each solve with the previous
/// converged value (the first with `guess`). Keeps a sweep on one branch.
pub fn solve_along(
    spec: &EulerSpec,
    points: &[Vec<f64>],
    guess: f64,
    opts: &SolverOptions,
) -> Vec<Result<Solution, EulerError>> {
    let mut seed = guess;
    points
        .iter()
        .map(|p| {
            let out = solve_with(spec, p, seed, opts);
            if let Ok(s) = &out {
                seed = s.value;
            }
            out
        })
        .collect()
}

/// Ridders' extrapolation of a central difference quotient `d(h)` (error
/// even in `h`) to `h → 0`, starting from `h0` and shrinking by 1.4. Steps
/// at which `d` fails are skipped by shrinking before the tableau starts.
pub fn ridders(d: &dyn Fn(f64) -> Result<f64, EulerError>, h0: f64) -> Result<f64, EulerError> {
    const CON: f64 = 1.4;
    const TABLE: usize = 10;
    const SAFE: f64 = 2.0;
    let mut h = h0;
    let mut first = d(h);
    for _ in 0..20 {
        if first.is_ok() {
            break;
        }
        h /= CON * CON;
        first = d(h);
    }
    let mut prev = vec![first?];
    let mut best = prev[0];
    let mut err = f64::INFINITY;
    for _ in 1..TABLE {
        h /= CON;
        let mut row = vec![d(h)?];
        let mut fac = CON * CON;
        for j in 1..=prev.len() {
            let v = (row[j - 1] * fac - prev[j - 1]) / (fac - 1.0);
            fac *= CON * CON;
            let e = (v - row[j - 1]).abs().max((v - prev[j - 1]).abs());
            if e <= err {
                err = e;
                best = v;
            }
            row.push(v);
        }
        let diverging = (row[row.len() - 1] - prev[prev.len() - 1]).abs() >= SAFE * err;
        prev = row;
        if diverging {
            break;
        }
    }
    Ok(best)
}

fn point_key(p: &[f64]) -> Vec<u64> {
    p.iter().map(|x| x.to_bits()).collect()
}

/// The web function defined by an [`EulerSpec`], solved on demand from a
/// pinned initial guess. Values are cached per point; the cache is not
/// shared across threads.
#[derive(Debug)]
pub struct SolvedField {
    spec: EulerSpec,
    guess: f64,
    options: SolverOptions,
    cache: RefCell<BTreeMap<Vec<u64>, Solution>>,
}

impl SolvedField {
    pub fn new(spec: EulerSpec, guess: f64) -> Self {
        SolvedField::with_options(spec, guess, SolverOptions::default())
    }

    pub fn with_options(spec: EulerSpec, guess: f64, options: SolverOptions) -> Self {
        SolvedField {
            spec,
            guess,
            options,
            cache: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn spec(&self) -> &EulerSpec {
        &self.spec
    }

    pub fn guess(&self) -> f64 {
        self.guess
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn solve(&self, point: &[f64]) -> Result<Solution, EulerError> {
        let key = point_key(point);
        if let Some(s) = self.cache.borrow().get(&key) {
            return Ok(*s);
        }
        let s = solve_with(&self.spec, point, self.guess, &self.options)?;
        self.cache.borrow_mut().insert(key, s);
        Ok(s)
    }

    /// Seeds the cache, e.g. with values found by [`solve_along`].
    pub fn insert(&self, point: &[f64], solution: Solution) {
        self.cache.borrow_mut().insert(point_key(point), solution);
    }

    /// Cached solutions in point order.
    pub fn cached(&self) -> Vec<(Vec<f64>, Solution)> {
        self.cache
            .borrow()
            .iter()
            .map(|(k, s)| (k.iter().map(|b| f64::from_bits(*b)).collect(), *s))
            .collect()
    }

    /// Value near a known one; used for finite-difference stencils.
    fn solve_near(&self, point: &[f64], seed: f64) -> Result<f64, EulerError> {
        solve_with(&self.spec, point, seed, &self.options).map(|s| s.value)
    }

    /// Gradient and Hessian by central differences of the solver, seeded by
    /// the value at `point` and extrapolated to zero step with [`ridders`].
    /// Initial steps are `max(1, |x_k|)/100`.
    pub fn finite_difference_jet(&self, point: &[f64]) -> Result<Jet, EulerError> {
        let n = self.spec.n;
        let value = self.solve(point)?.value;
        let at = |shifts: &[(usize, f64)]| -> Result<f64, EulerError> {
            let mut q = point.to_vec();
            for &(k, h) in shifts {
                q[k] += h;
            }
            self.solve_near(&q, value)
        };
        let step = |k: usize| point[k].abs().max(1.0) / 100.0;
        let mut grad = vec![0.0; n];
        for (k, g) in grad.iter_mut().enumerate() {
            let d = |h: f64| Ok((at(&[(k, h)])? - at(&[(k, -h)])?) / (2.0 * h));
            *g = ridders(&d, step(k))?;
        }
        let mut hess = vec![vec![0.0; n]; n];
        for i in 0..n {
            let d = |h: f64| Ok((at(&[(i, h)])? - 2.0 * value + at(&[(i, -h)])?) / (h * h));
            hess[i][i] = ridders(&d, step(i))?;
            for j in (i + 1)..n {
                let ratio = step(j) / step(i);
                let d = |h: f64| {
                    let k = h * ratio;
                    Ok((at(&[(i, h), (j, k)])? - at(&[(i, h), (j, -k)])?
                        - at(&[(i, -h), (j, k)])?
                        + at(&[(i, -h), (j, -k)])?)
                        / (4.0 * h * k))
                };
                let v = ridders(&d, step(i))?;
                hess[i][j] = v;
                hess[j][i] = v;
            }
        }
        Ok(Jet { value, grad, hess })
    }

    /// Implicit-function-theorem jet: `f_i = −F_i / F_f` and
    /// `f_ij = −(F_ij + F_if f_j + F_jf f_i + F_ff f_i f_j) / F_f`.
    pub fn implicit_jet(&self, point: &[f64]) -> Result<Jet, EulerError> {
        let n = self.spec.n;
        let value = self.solve(point)?.value;
        let ext = EulerSpec::extended(point, value);
        let g = self
            .spec
            .implicit_grad
            .iter()
            .map(|e| e.eval_at(&ext))
            .collect::<Result<Vec<_>, _>>()?;
        let ff = g[n];
        if ff.abs() <= f64::EPSILON * (1.0 + g.iter().fold(0.0f64, |m, x| m.max(x.abs()))) {
            return Err(EulerError::Fold(ff));
        }
        let h = |i: usize, j: usize| self.spec.implicit_hess[i][j].eval_at(&ext);
        let grad: Vec<f64> = (0..n).map(|i| -g[i] / ff).collect();
        let h_ff = h(n, n)?;
        let h_f: Vec<f64> = (0..n).map(|i| h(i, n)).collect::<Result<_, _>>()?;
        let mut hess = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = -(h(i, j)? + h_f[i] * grad[j] + h_f[j] * grad[i] + h_ff * grad[i] * grad[j])
                    / ff;
                hess[i][j] = v;
                hess[j][i] = v;
            }
        }
        Ok(Jet { value, grad, hess })
    }
}

impl ScalarField for SolvedField {
    fn dimension(&self) -> usize {
        self.spec.n
    }

    fn value(&self, point: &[f64]) -> Result<f64, FieldError> {
        Ok(self.solve(point)?.value)
    }

    fn jet(&self, point: &[f64]) -> Result<Jet, FieldError> {
        Ok(self.implicit_jet(point)?)
    }
}

/// Which derivatives an Euler-system residual uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Derivatives {
    FiniteDifference,
    ImplicitFunction,
}

/// `|∂f/∂x_s − Ψ_s(f) ∂f/∂x_n|` at `point` (0-based `s < n − 1`), with its
/// magnitude scale `max(1, |f_s| + |Ψ_s(f) f_n|)`. Finite differences use
/// step `max(1, |x_k|)·ε^{1/3}`.
pub fn euler_system_residual(
    field: &SolvedField,
    s: usize,
    point: &[f64],
    derivatives: Derivatives,
) -> Result<(f64, f64), EulerError> {
    let n = field.spec.n;
    if s + 1 >= n {
        return Err(EulerError::InvalidSpec(format!("index {s} is not below n - 1")));
    }
    let value = field.solve(point)?.value;
    let (fs, fn_) = match derivatives {
        Derivatives::ImplicitFunction => {
            let jet = field.implicit_jet(point)?;
            (jet.grad[s], jet.grad[n - 1])
        }
        Derivatives::FiniteDifference => {
            let d = |k: usize| -> Result<f64, EulerError> {
                let h = point[k].abs().max(1.0) * f64::EPSILON.cbrt();
                let mut up = point.to_vec();
                let mut down = point.to_vec();
                up[k] += h;
                down[k] -= h;
                Ok((field.solve_near(&up, value)? - field.solve_near(&down, value)?) / (2.0 * h))
            };
            (d(s)?, d(n - 1)?)
        }
    };
    let psi = field.spec.psi[s].eval_at(&[value])?;
    Ok(((fs - psi * fn_).abs(), (fs.abs() + (psi * fn_).abs()).max(1.0)))
}

/// Euler-system residuals over a plan: worst `s` per point.
pub fn euler_system_check(
    field: &SolvedField,
    plan: &SamplePlan,
    derivatives: Derivatives,
    opts: &CheckOptions,
) -> CheckSummary {
    let n = field.spec.n;
    let mut stats = ResidualStats::new();
    for p in plan.points() {
        if plan.is_excluded(&p) {
            stats.record_status(SampleStatus::ExcludedSingular);
            continue;
        }
        let worst = (0..n - 1).try_fold((0.0f64, 1.0f64), |best, s| {
            euler_system_residual(field, s, &p, derivatives).map(|cur| {
                if cur.0 / cur.1 > best.0 / best.1 {
                    cur
                } else {
                    best
                }
            })
        });
        match worst {
            Ok((r, scale)) => stats.record(&p, r, scale),
            Err(_) => stats.record_status(SampleStatus::EvalError),
        }
    }
    stats.summarize(opts)
}

/// Largest relative disagreement between the implicit-function and the
/// finite-difference jets over a plan (gradient and Hessian entries, each
/// scaled by `max(1, |entry|)`).
pub fn jet_cross_check(field: &SolvedField, plan: &SamplePlan, opts: &CheckOptions) -> CheckSummary {
    let mut stats = ResidualStats::new();
    for p in plan.points() {
        if plan.is_excluded(&p) {
            stats.record_status(SampleStatus::ExcludedSingular);
            continue;
        }
        match (field.implicit_jet(&p), field.finite_difference_jet(&p)) {
            (Ok(a), Ok(b)) => {
                let grads = a.grad.iter().zip(&b.grad);
                let hess = a.hess.iter().flatten().zip(b.hess.iter().flatten());
                let worst = grads
                    .chain(hess)
                    .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
                    .fold(0.0, f64::max);
                stats.record(&p, worst, 1.0);
            }
            _ => stats.record_status(SampleStatus::EvalError),
        }
    }
    stats.summarize(opts)
}

/// Guard for the distribution checks: every `f_{s+1}` must be away from zero.
fn ratios_defined(jet: &Jet, opts: &CheckOptions) -> bool {
    let floor = opts.singular_tolerance * (1.0 + jet.grad_norm());
    jet.grad[1..].iter().all(|g| g.abs() >= floor)
}

/// `X_s(A_t)` multiplied through by `f_{s+1} f_{t+1}²`, and its scale.
///
/// For `s = t` this is `Flex_{s,s+1}`.
pub fn cleared_x_of_a(jet: &Jet, s: usize, t: usize) -> (f64, f64) {
    let g = &jet.grad;
    let h = &jet.hess;
    let a = g[s + 1] * h[t][s] * g[t + 1];
    let b = g[s + 1] * g[t] * h[t + 1][s];
    let c = g[s] * h[t][s + 1] * g[t + 1];
    let d = g[s] * g[t] * h[t + 1][s + 1];
    (a - b - c + d, (a.abs() + b.abs() + c.abs() + d.abs()).max(1.0))
}

/// `X_s(f)` multiplied by `f_{s+1}`; zero by construction of `A_s`.
pub fn cleared_x_of_f(jet: &Jet, s: usize) -> (f64, f64) {
    let a = jet.grad[s] * jet.grad[s + 1];
    let b = jet.grad[s + 1] * jet.grad[s];
    (a - b, (a.abs() + b.abs()).max(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionReport {
    /// `X_s(A_t)` over all `s, t`.
    pub x_of_a: CheckSummary,
    /// `X_s(f)` over all `s`.
    pub x_of_f: CheckSummary,
    pub pass: bool,
}

/// First-integral facts of the distribution spanned by the `X_s`: the
/// ratios `A_t` and `f` itself are annihilated by every `X_s` iff `f` is
/// hyperplanar.
pub fn first_integral_check(
    f: &Expr,
    n: usize,
    plan: &SamplePlan,
    opts: &CheckOptions,
) -> DistributionReport {
    let field = WebFunction::new(f.clone(), n);
    let mut xa = ResidualStats::new();
    let mut xf = ResidualStats::new();
    for p in plan.points() {
        let jet = match field.jet(&p) {
            Ok(j) if !plan.is_excluded(&p) && ratios_defined(&j, opts) => j,
            Ok(_) => {
                xa.record_status(SampleStatus::ExcludedSingular);
                xf.record_status(SampleStatus::ExcludedSingular);
                continue;
            }
            Err(_) => {
                xa.record_status(SampleStatus::EvalError);
                xf.record_status(SampleStatus::EvalError);
                continue;
            }
        };
        let worst = |items: Vec<(f64, f64)>| {
            items
                .into_iter()
                .fold((0.0f64, 1.0f64), |b, c| if c.0.abs() / c.1 > b.0.abs() / b.1 { c } else { b })
        };
        let (r, sc) = worst(
            (0..n - 1)
                .flat_map(|s| (0..n - 1).map(move |t| (s, t)))
                .map(|(s, t)| cleared_x_of_a(&jet, s, t))
                .collect(),
        );
        xa.record(&p, r, sc);
        let (r, sc) = worst((0..n - 1).map(|s| cleared_x_of_f(&jet, s)).collect());
        xf.record(&p, r, sc);
    }
    let x_of_a = xa.summarize(opts);
    let x_of_f = xf.summarize(opts);
    let pass = x_of_a.pass && x_of_f.pass;
    DistributionReport {
        x_of_a,
        x_of_f,
        pass,
    }
}

/// Components of `X_s = ∂_s − (f_s / f_{s+1}) ∂_{s+1}` as expressions.
fn distribution_field(grad: &[Expr], s: usize) -> Vec<Expr> {
    let mut v = vec![Expr::zero(); grad.len()];
    v[s] = Expr::one();
    v[s + 1] = -(&grad[s] / &grad[s + 1]);
    v
}

/// Lie bracket `[V, W]^k = Σ_m V^m ∂_m W^k − W^m ∂_m V^k`.
fn lie_bracket(v: &[Expr], w: &[Expr]) -> Vec<Expr> {
    let n = v.len();
    (0..n)
        .map(|k| {
            (0..n).fold(Expr::zero(), |acc, m| {
                acc + &v[m] * &w[k].diff_x(m) - &w[m] * &v[k].diff_x(m)
            })
        })
        .collect()
}

/// `[X_s, X_t]` for `s < t`, computed as a generic Lie bracket of the
/// symbolic vector fields and multiplied by `f_{s+1}² f_{t+1}²`. Vanishes on
/// hyperplanar web functions.
pub fn commutator_check(f: &Expr, n: usize, plan: &SamplePlan, opts: &CheckOptions) -> CheckSummary {
    let grad = f.gradient(n);
    let fields: Vec<Vec<Expr>> = (0..n - 1).map(|s| distribution_field(&grad, s)).collect();
    let brackets: Vec<((usize, usize), Vec<Expr>)> = (0..n - 1)
        .flat_map(|s| ((s + 1)..n - 1).map(move |t| (s, t)))
        .map(|(s, t)| ((s, t), lie_bracket(&fields[s], &fields[t])))
        .collect();
    let web = WebFunction::new(f.clone(), n);
    let mut stats = ResidualStats::new();
    for p in plan.points() {
        let jet = match web.jet(&p) {
            Ok(j) if !plan.is_excluded(&p) && ratios_defined(&j, opts) => j,
            Ok(_) => {
                stats.record_status(SampleStatus::ExcludedSingular);
                continue;
            }
            Err(_) => {
                stats.record_status(SampleStatus::EvalError);
                continue;
            }
        };
        let scale = (jet.grad_max().powi(4) * jet.hess_max()).max(1.0);
        let worst = brackets.iter().try_fold(0.0f64, |worst, ((s, t), comps)| {
            let clear = (jet.grad[s + 1] * jet.grad[t + 1]).powi(2);
            comps.iter().try_fold(worst, |w, c| {
                c.eval_at(&p).map(|v| w.max((v * clear).abs()))
            })
        });
        match worst {
            Ok(r) => stats.record(&p, r, scale),
            Err(_) => stats.record_status(SampleStatus::EvalError),
        }
    }
    stats.summarize(opts)
}

/// One recovered sample of `Ψ_s(f) = f_s / f_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiSample {
    pub point: Vec<f64>,
    pub value: f64,
    pub psi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiReconstruction {
    pub samples: Vec<PsiSample>,
    /// Recovered `Ψ` at a point versus at a companion point on the same level
    /// set.
    pub dependence: CheckSummary,
    /// Recovered versus expected `Ψ_s(f)`, when expectations are given.
    pub expected: Option<CheckSummary>,
    /// First pair of points with equal `f` but different recovered `Ψ`.
    pub counterexample: Option<(Vec<f64>, Vec<f64>)>,
    pub pass: bool,
}

/// Tolerances of [`reconstruct_psi`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiOptions {
    /// Two points count as on the same level set when their values agree
    /// within this.
    pub level_tolerance: f64,
    /// Allowed disagreement of recovered `Ψ` values.
    pub psi_tolerance: f64,
    /// Euclidean length of the tangent step to the companion point.
    pub companion_step: f64,
}

impl Default for PsiOptions {
    fn default() -> Self {
        PsiOptions {
            level_tolerance: 1e-9,
            psi_tolerance: 1e-6,
            companion_step: 0.05,
        }
    }
}

fn recovered_psi(jet: &Jet) -> Vec<f64> {
    let n = jet.grad.len();
    jet.grad[..n - 1].iter().map(|g| g / jet.grad[n - 1]).collect()
}

/// Moves `start` onto the level set `field = level` by Newton steps along
/// the gradient.
fn project_to_level(field: &dyn ScalarField, start: Vec<f64>, level: f64, tol: f64) -> Option<Vec<f64>> {
    let mut q = start;
    for _ in 0..50 {
        let jet = field.jet(&q).ok()?;
        let gap = jet.value - level;
        if gap.abs() <= tol {
            return Some(q);
        }
        let g2: f64 = jet.grad.iter().map(|g| g * g).sum();
        if g2 == 0.0 {
            return None;
        }
        q.iter_mut().zip(&jet.grad).for_each(|(x, g)| *x -= gap * g / g2);
    }
    None
}

/// Recovers `Ψ_s(f) = f_s / f_n` at every plan point and checks that it is a
/// function of `f` alone: a companion point is found on the same level set
/// (tangent step, then projection) and must give the same `Ψ`. When
/// `expected` holds `n − 1` expressions in `t`, the recovered values are also
/// compared with `expected_s(f)`.
pub fn reconstruct_psi(
    field: &dyn ScalarField,
    plan: &SamplePlan,
    expected: Option<&[Expr]>,
    psi_opts: &PsiOptions,
    opts: &CheckOptions,
) -> PsiReconstruction {
    let n = field.dimension();
    let mut samples = Vec::new();
    let mut dep = ResidualStats::new();
    let mut exp = ResidualStats::new();
    let mut counterexample = None;
    let last_defined = |jet: &Jet| {
        jet.grad[n - 1].abs() >= opts.singular_tolerance * (1.0 + jet.grad_norm())
    };
    for p in plan.points() {
        let jet = match field.jet(&p) {
            Ok(j) if !plan.is_excluded(&p) && last_defined(&j) => j,
            Ok(_) => {
                dep.record_status(SampleStatus::ExcludedSingular);
                exp.record_status(SampleStatus::ExcludedSingular);
                continue;
            }
            Err(_) => {
                dep.record_status(SampleStatus::EvalError);
                exp.record_status(SampleStatus::EvalError);
                continue;
            }
        };
        let psi = recovered_psi(&jet);
        if let Some(expected) = expected {
            let worst = expected.iter().zip(&psi).try_fold(0.0f64, |w, (e, got)| {
                e.eval_at(&[jet.value])
                    .map(|want| w.max((got - want).abs() / want.abs().max(1.0)))
            });
            match worst {
                Ok(r) => exp.record(&p, r, 1.0),
                Err(_) => exp.record_status(SampleStatus::EvalError),
            }
        }
        let v = level_set_tangent(&jet, &p);
        let start: Vec<f64> = p.iter().zip(&v).map(|(x, d)| x + psi_opts.companion_step * d).collect();
        let companion = project_to_level(field, start, jet.value, psi_opts.level_tolerance)
            .and_then(|q| field.jet(&q).ok().map(|j| (q, j)))
            .filter(|(_, j)| last_defined(j));
        match companion {
            Some((q, cjet)) => {
                let other = recovered_psi(&cjet);
                let worst = psi
                    .iter()
                    .zip(&other)
                    .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                    .fold(0.0, f64::max);
                if worst > psi_opts.psi_tolerance && counterexample.is_none() {
                    counterexample = Some((p.clone(), q));
                }
                dep.record(&p, worst, 1.0);
            }
            None => dep.record_status(SampleStatus::EvalError),
        }
        samples.push(PsiSample {
            point: p,
            value: jet.value,
            psi,
        });
    }
    let psi_check = CheckOptions {
        tolerance: psi_opts.psi_tolerance,
        ..*opts
    };
    let dependence = dep.summarize(&psi_check);
    let expected = expected.map(|_| exp.summarize(&psi_check));
    let pass = dependence.pass && expected.as_ref().is_none_or(|e| e.pass);
    PsiReconstruction {
        samples,
        dependence,
        expected,
        counterexample,
        pass,
    }
}
