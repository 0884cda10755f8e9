//! The flex operator and the geodesic residual systems for level-set
//! foliations.
//!
//! For a web function `f` and a pair of coordinates `(i, j)`,
//!
//! ```text
//! (Flex f)_ij = f_j² f_ii − 2 f_i f_j f_ij + f_i² f_jj
//! ```
//!
//! The level sets of `f` are totally geodesic for a torsion-free connection
//! `Γ` iff, for every pair,
//!
//! ```text
//! Flex_ij = Σ_k [Γ_ii^k f_k f_j² + Γ_jj^k f_k f_i² − (Γ_ij^k + Γ_ji^k) f_k f_i f_j]
//! ```
//!
//! All residuals here are reported in this cleared form (polynomial in the
//! derivatives). The scaled residual divides by
//! `max(1, |f_j² f_ii| + |2 f_i f_j f_ij| + |f_i² f_jj|)`.
//!
//! Indices in this API are 0-based; reports print them 1-based.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::field::{FieldError, Jet, ScalarField, WebFunction};
use crate::geometry::{integrate_geodesic, ChristoffelTable, Connection};
use crate::report::{CheckOptions, CheckSummary, ResidualStats, SampleStatus};
use crate::sampling::SamplePlan;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WebCheckError {
    #[error("check requires constant-curvature or hypersurface geometry")]
    UnsupportedGeometry,
    #[error("web function {name} needs {needed} coordinates but the web has dimension {dimension}")]
    DimensionMismatch {
        name: String,
        needed: usize,
        dimension: usize,
    },
}

/// The geometry a web lives in.
#[derive(Clone, Debug)]
pub enum Geometry {
    Flat,
    /// Conformal metric `Σ dx_k² / (1 + κ Σ x_k²)²`.
    ConstantCurvature { kappa: f64 },
    /// Induced metric on the graph `x_{n+1} = u(x_1..x_n)`; `u` uses the same
    /// coordinates as the web functions.
    Hypersurface { u: Expr },
    /// Any connection in a coordinate frame.
    Explicit(Connection),
}

/// A named collection of web functions and the geometry they live in.
#[derive(Clone, Debug)]
pub struct WebSpec {
    pub dimension: usize,
    pub geometry: Geometry,
    pub functions: Vec<(String, Expr)>,
}

/// One sampled residual of a geodesic system.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSample {
    pub point: Vec<f64>,
    pub pair: (usize, usize),
    /// Present iff `status` is `Ok`.
    pub residual: Option<f64>,
    pub scale: f64,
    pub status: SampleStatus,
}

impl ResidualSample {
    fn ok(point: &[f64], pair: (usize, usize), residual: f64, scale: f64) -> Self {
        ResidualSample {
            point: point.to_vec(),
            pair,
            residual: Some(residual),
            scale,
            status: SampleStatus::Ok,
        }
    }

    fn failed(point: &[f64], pair: (usize, usize), status: SampleStatus) -> Self {
        ResidualSample {
            point: point.to_vec(),
            pair,
            residual: None,
            scale: 1.0,
            status,
        }
    }

    /// `|residual| / max(1, scale)`, if present.
    pub fn scaled(&self) -> Option<f64> {
        self.residual.map(|r| r.abs() / self.scale.max(1.0))
    }

    fn record(&self, stats: &mut ResidualStats) {
        match self.residual {
            Some(r) => stats.record(&self.point, r, self.scale),
            None => stats.record_status(self.status),
        }
    }
}

/// Flex value and its magnitude scale at a jet. Evaluated with the pair in
/// canonical order so that `flex_at(j, a, b) == flex_at(j, b, a)` bit for bit.
pub fn flex_terms(jet: &Jet, i: usize, j: usize) -> (f64, f64) {
    if i == j {
        return (0.0, 1.0);
    }
    let (a, b) = (i.min(j), i.max(j));
    let (fa, fb) = (jet.grad[a], jet.grad[b]);
    let t1 = fb * fb * jet.hess[a][a];
    let t2 = 2.0 * fa * fb * jet.hess[a][b];
    let t3 = fa * fa * jet.hess[b][b];
    (t1 - t2 + t3, (t1.abs() + t2.abs() + t3.abs()).max(1.0))
}

pub fn flex_at(jet: &Jet, i: usize, j: usize) -> f64 {
    flex_terms(jet, i, j).0
}

/// `(Flex f)_ij` at `point`, with symbolic derivatives.
pub fn flex(f: &Expr, i: usize, j: usize, point: &[f64]) -> Result<f64, EvalError> {
    if i == j {
        f.eval_at(point)?;
        return Ok(0.0);
    }
    let (a, b) = (i.min(j), i.max(j));
    let fa = f.diff_x(a);
    let fb = f.diff_x(b);
    let jet = Jet {
        value: f.eval_at(point)?,
        grad: pair_vec(point.len().max(b + 1), a, b, fa.eval_at(point)?, fb.eval_at(point)?),
        hess: {
            let n = point.len().max(b + 1);
            let mut h = vec![vec![0.0; n]; n];
            h[a][a] = fa.diff_x(a).eval_at(point)?;
            let ab = fa.diff_x(b).eval_at(point)?;
            h[a][b] = ab;
            h[b][a] = ab;
            h[b][b] = fb.diff_x(b).eval_at(point)?;
            h
        },
    };
    Ok(flex_at(&jet, a, b))
}

fn pair_vec(n: usize, a: usize, b: usize, va: f64, vb: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[a] = va;
    v[b] = vb;
    v
}

/// Critical points (vanishing gradient) are excluded from the specialized
/// systems.
fn is_critical(jet: &Jet, opts: &CheckOptions) -> bool {
    jet.grad_norm() <= opts.singular_tolerance * (1.0 + jet.value.abs())
}

/// The general-connection guard: `min(|f_i|, |f_j|) < tol · (1 + ‖∇f‖)`.
fn pair_is_singular(jet: &Jet, i: usize, j: usize, opts: &CheckOptions) -> bool {
    jet.grad[i].abs().min(jet.grad[j].abs()) < opts.singular_tolerance * (1.0 + jet.grad_norm())
}

/// Right-hand side of the general system at a jet.
pub fn connection_terms(jet: &Jet, gamma: &ChristoffelTable, i: usize, j: usize) -> f64 {
    let (fi, fj) = (jet.grad[i], jet.grad[j]);
    (0..jet.grad.len())
        .map(|k| {
            let fk = jet.grad[k];
            gamma.get(i, i, k) * fk * fj * fj + gamma.get(j, j, k) * fk * fi * fi
                - (gamma.get(i, j, k) + gamma.get(j, i, k)) * fk * fi * fj
        })
        .sum()
}

/// Geometry with its derived data prepared once per check.
enum Prepared<'a> {
    Flat,
    ConstantCurvature(f64),
    Hypersurface(WebFunction),
    Explicit(&'a Connection),
}

impl<'a> Prepared<'a> {
    fn new(geometry: &'a Geometry, n: usize) -> Self {
        match geometry {
            Geometry::Flat => Prepared::Flat,
            Geometry::ConstantCurvature { kappa } => Prepared::ConstantCurvature(*kappa),
            Geometry::Hypersurface { u } => Prepared::Hypersurface(WebFunction::new(u.clone(), n)),
            Geometry::Explicit(conn) => Prepared::Explicit(conn),
        }
    }

    /// Per-point data that does not depend on the web function.
    fn at(&self, point: &[f64]) -> Result<PointGeometry, ()> {
        Ok(match self {
            Prepared::Flat => PointGeometry::Flat,
            Prepared::ConstantCurvature(kappa) => {
                let r2: f64 = point.iter().map(|x| x * x).sum();
                let denom = 1.0 + kappa * r2;
                if denom == 0.0 {
                    return Err(());
                }
                PointGeometry::ConstantCurvature { kappa: *kappa, denom }
            }
            Prepared::Hypersurface(u) => PointGeometry::Hypersurface(u.jet(point).map_err(|_| ())?),
            Prepared::Explicit(conn) => PointGeometry::Explicit(conn.eval(point).map_err(|_| ())?),
        })
    }
}

enum PointGeometry {
    Flat,
    ConstantCurvature { kappa: f64, denom: f64 },
    Hypersurface(Jet),
    Explicit(ChristoffelTable),
}

/// `f_j² u_ii − 2 f_i f_j u_ij + f_i² u_jj`.
fn weighted_flex(f: &Jet, u: &Jet, i: usize, j: usize) -> f64 {
    let (fi, fj) = (f.grad[i], f.grad[j]);
    fj * fj * u.hess[i][i] - 2.0 * fi * fj * u.hess[i][j] + fi * fi * u.hess[j][j]
}

fn residual_with(
    geo: &PointGeometry,
    jet: &Jet,
    point: &[f64],
    i: usize,
    j: usize,
    opts: &CheckOptions,
) -> ResidualSample {
    let pair = (i, j);
    if let PointGeometry::Explicit(_) = geo {
        if pair_is_singular(jet, i, j, opts) {
            return ResidualSample::failed(point, pair, SampleStatus::ExcludedSingular);
        }
    } else if is_critical(jet, opts) {
        return ResidualSample::failed(point, pair, SampleStatus::ExcludedSingular);
    }
    let (flex, scale) = flex_terms(jet, i, j);
    let rhs = match geo {
        PointGeometry::Flat => 0.0,
        PointGeometry::ConstantCurvature { kappa, denom } => {
            let (fi, fj) = (jet.grad[i], jet.grad[j]);
            let radial: f64 = point.iter().zip(&jet.grad).map(|(x, g)| x * g).sum();
            2.0 * kappa * (fi * fi + fj * fj) * radial / denom
        }
        PointGeometry::Hypersurface(u) => {
            let uf: f64 = u.grad.iter().zip(&jet.grad).map(|(a, b)| a * b).sum();
            let w = 1.0 + u.grad.iter().map(|g| g * g).sum::<f64>();
            uf / w * weighted_flex(jet, u, i, j)
        }
        PointGeometry::Explicit(gamma) => connection_terms(jet, gamma, i, j),
    };
    ResidualSample::ok(point, pair, flex - rhs, scale)
}

fn single_sample(
    f: &Expr,
    geometry: &Geometry,
    i: usize,
    j: usize,
    point: &[f64],
) -> ResidualSample {
    let n = point.len();
    let prepared = Prepared::new(geometry, n);
    let Ok(geo) = prepared.at(point) else {
        return ResidualSample::failed(point, (i, j), SampleStatus::EvalError);
    };
    match WebFunction::new(f.clone(), n).jet(point) {
        Ok(jet) => residual_with(&geo, &jet, point, i, j, &CheckOptions::default()),
        Err(_) => ResidualSample::failed(point, (i, j), SampleStatus::EvalError),
    }
}

/// Cleared residual of the general system for connection `conn`, with the
/// singular-gradient guard.
pub fn geodesic_residual(
    f: &Expr,
    conn: &Connection,
    i: usize,
    j: usize,
    point: &[f64],
) -> ResidualSample {
    single_sample(f, &Geometry::Explicit(conn.clone()), i, j, point)
}

/// `Flex_ij − 2κ(f_i² + f_j²)(Σ x_k f_k)/(1 + κ Σ x_k²)`.
pub fn constant_curvature_residual(
    f: &Expr,
    kappa: f64,
    i: usize,
    j: usize,
    point: &[f64],
) -> ResidualSample {
    single_sample(f, &Geometry::ConstantCurvature { kappa }, i, j, point)
}

/// `Flex_ij − (Σ u_k f_k)/(1 + Σ u_k²) · (f_j² u_ii − 2 f_i f_j u_ij + f_i² u_jj)`.
pub fn hypersurface_residual(
    f: &Expr,
    u: &Expr,
    i: usize,
    j: usize,
    point: &[f64],
) -> ResidualSample {
    single_sample(f, &Geometry::Hypersurface { u: u.clone() }, i, j, point)
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect()
}

/// Evaluates the plan's exclusion predicates and the field jet.
fn jet_status(
    field: &dyn ScalarField,
    plan: &SamplePlan,
    point: &[f64],
) -> Result<Jet, SampleStatus> {
    if plan.is_excluded(point) {
        return Err(SampleStatus::ExcludedSingular);
    }
    field.jet(point).map_err(|_| SampleStatus::EvalError)
}

/// Max scaled `|Flex_st|` over all pairs `s < t` per point; the web function
/// has hyperplanar level sets iff this vanishes.
pub fn hyperplanarity_check(
    field: &dyn ScalarField,
    plan: &SamplePlan,
    opts: &CheckOptions,
) -> CheckSummary {
    let n = field.dimension();
    let mut stats = ResidualStats::new();
    for p in plan.points() {
        let jet = match jet_status(field, plan, &p) {
            Ok(jet) => jet,
            Err(status) => {
                stats.record_status(status);
                continue;
            }
        };
        if is_critical(&jet, opts) {
            stats.record_status(SampleStatus::ExcludedSingular);
            continue;
        }
        let (res, scale) = worst_pair(pairs(n).into_iter().map(|(s, t)| flex_terms(&jet, s, t)));
        stats.record(&p, res, scale);
    }
    stats.summarize(opts)
}

/// Picks the `(residual, scale)` with the largest scaled magnitude.
fn worst_pair(items: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    items.fold((0.0, 1.0), |best, cur| {
        if cur.0.abs() / cur.1.max(1.0) > best.0.abs() / best.1.max(1.0) {
            cur
        } else {
            best
        }
    })
}

/// Hypothesis of the pair implication: if `Flex` vanishes for `base` at a
/// point, it vanishes for every pair there. Records, at each point where the
/// premise holds, the worst scaled `Flex` over all pairs.
pub fn pair_implication_check(
    field: &dyn ScalarField,
    plan: &SamplePlan,
    base: (usize, usize),
    opts: &CheckOptions,
) -> CheckSummary {
    let n = field.dimension();
    let mut stats = ResidualStats::new();
    for p in plan.points() {
        let jet = match jet_status(field, plan, &p) {
            Ok(jet) => jet,
            Err(status) => {
                stats.record_status(status);
                continue;
            }
        };
        let (base_res, base_scale) = flex_terms(&jet, base.0, base.1);
        if is_critical(&jet, opts) || base_res.abs() / base_scale > opts.tolerance {
            stats.record_status(SampleStatus::ExcludedSingular);
            continue;
        }
        let (res, scale) = worst_pair(pairs(n).into_iter().map(|(s, t)| flex_terms(&jet, s, t)));
        stats.record(&p, res, scale);
    }
    stats.summarize(opts)
}

/// Result of the `i,j`-independence check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    /// The geodesic system itself (precondition).
    pub system: CheckSummary,
    /// `Flex_ij · D_kl − Flex_kl · D_ij` over all pairs of pairs.
    pub identity: CheckSummary,
    pub pass: bool,
}

/// Checks that `Flex_ij / D_ij` does not depend on the pair, in
/// cross-multiplied form. `D_ij = f_i² + f_j²` for constant curvature and
/// `D_ij = f_j² u_ii − 2 f_i f_j u_ij + f_i² u_jj` for hypersurfaces.
pub fn ratio_independence_check(
    field: &dyn ScalarField,
    geometry: &Geometry,
    plan: &SamplePlan,
    opts: &CheckOptions,
) -> Result<RatioReport, WebCheckError> {
    if !matches!(
        geometry,
        Geometry::ConstantCurvature { .. } | Geometry::Hypersurface { .. }
    ) {
        return Err(WebCheckError::UnsupportedGeometry);
    }
    let n = field.dimension();
    let prepared = Prepared::new(geometry, n);
    let all_pairs = pairs(n);
    let mut system = ResidualStats::new();
    let mut identity = ResidualStats::new();
    for p in plan.points() {
        let jet = match jet_status(field, plan, &p) {
            Ok(jet) => jet,
            Err(status) => {
                system.record_status(status);
                identity.record_status(status);
                continue;
            }
        };
        let Ok(geo) = prepared.at(&p) else {
            system.record_status(SampleStatus::EvalError);
            identity.record_status(SampleStatus::EvalError);
            continue;
        };
        if is_critical(&jet, opts) {
            system.record_status(SampleStatus::ExcludedSingular);
            identity.record_status(SampleStatus::ExcludedSingular);
            continue;
        }
        let (res, scale) = worst_pair(all_pairs.iter().map(|&(i, j)| {
            let s = residual_with(&geo, &jet, &p, i, j, opts);
            (s.residual.unwrap_or(0.0), s.scale)
        }));
        system.record(&p, res, scale);

        let weight = |i: usize, j: usize| match &geo {
            PointGeometry::Hypersurface(u) => weighted_flex(&jet, u, i, j),
            _ => jet.grad[i].powi(2) + jet.grad[j].powi(2),
        };
        let terms: Vec<(f64, f64)> = all_pairs
            .iter()
            .map(|&(i, j)| (flex_at(&jet, i, j), weight(i, j)))
            .collect();
        let mut worst = (0.0, 1.0);
        for (a, &(flex_a, d_a)) in terms.iter().enumerate() {
            for &(flex_b, d_b) in &terms[a + 1..] {
                let lhs = flex_a * d_b;
                let rhs = flex_b * d_a;
                worst = worst_pair([worst, (lhs - rhs, lhs.abs() + rhs.abs())].into_iter());
            }
        }
        identity.record(&p, worst.0, worst.1);
    }
    let system = system.summarize(opts);
    let identity = identity.summarize(opts);
    let pass = system.pass && identity.pass;
    Ok(RatioReport {
        system,
        identity,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairReport {
    /// 1-based coordinate indices.
    pub pair: [usize; 2],
    pub summary: CheckSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctionReport {
    pub name: String,
    pub expression: String,
    pub pairs: Vec<PairReport>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WebReport {
    pub functions: Vec<FunctionReport>,
    pub pass: bool,
}

/// Runs the geodesic system matching the web's geometry for every function,
/// every pair and every plan point. A web is geodesic iff every foliation is.
pub fn geodesic_web_check(
    web: &WebSpec,
    plan: &SamplePlan,
    opts: &CheckOptions,
) -> Result<WebReport, WebCheckError> {
    let n = web.dimension;
    let prepared = Prepared::new(&web.geometry, n);
    let all_pairs = pairs(n);
    let points = plan.points();
    let geos: Vec<Option<PointGeometry>> = points.iter().map(|p| prepared.at(p).ok()).collect();
    let mut functions = Vec::with_capacity(web.functions.len());
    for (name, expr) in &web.functions {
        if expr.dimension() > n {
            return Err(WebCheckError::DimensionMismatch {
                name: name.clone(),
                needed: expr.dimension(),
                dimension: n,
            });
        }
        let field = WebFunction::new(expr.clone(), n);
        let mut stats = vec![ResidualStats::new(); all_pairs.len()];
        for (p, geo) in points.iter().zip(&geos) {
            let jet = match (jet_status(&field, plan, p), geo) {
                (Ok(jet), Some(_)) => jet,
                (Err(status), _) => {
                    stats.iter_mut().for_each(|s| s.record_status(status));
                    continue;
                }
                (Ok(_), None) => {
                    stats.iter_mut().for_each(|s| s.record_status(SampleStatus::EvalError));
                    continue;
                }
            };
            let geo = geo.as_ref().expect("checked above");
            for (stat, &(i, j)) in stats.iter_mut().zip(&all_pairs) {
                residual_with(geo, &jet, p, i, j, opts).record(stat);
            }
        }
        let pairs: Vec<PairReport> = all_pairs
            .iter()
            .zip(&stats)
            .map(|(&(i, j), s)| PairReport {
                pair: [i + 1, j + 1],
                summary: s.summarize(opts),
            })
            .collect();
        let pass = pairs.iter().all(|p| p.summary.pass);
        functions.push(FunctionReport {
            name: name.clone(),
            expression: expr.to_string(),
            pairs,
            pass,
        });
    }
    let pass = functions.iter().all(|f| f.pass);
    Ok(WebReport { functions, pass })
}

/// Checks `Flex(φ∘f)_ij = φ'(f)³ · Flex(f)_ij`. `phi` is written in `t`;
/// points where `f` falls outside `phi_domain` are excluded.
pub fn reparametrization_check(
    f: &Expr,
    phi: &Expr,
    phi_domain: Option<(f64, f64)>,
    n: usize,
    plan: &SamplePlan,
    opts: &CheckOptions,
) -> CheckSummary {
    let base = WebFunction::new(f.clone(), n);
    let composed = WebFunction::new(phi.compose(f), n);
    let dphi = phi.diff_x(0);
    let mut stats = ResidualStats::new();
    for p in plan.points() {
        let jets = jet_status(&base, plan, &p).and_then(|b| {
            let c = composed.jet(&p).map_err(|_| SampleStatus::EvalError)?;
            Ok((b, c))
        });
        let (jet, cjet) = match jets {
            Ok(j) => j,
            Err(status) => {
                stats.record_status(status);
                continue;
            }
        };
        if let Some((lo, hi)) = phi_domain {
            if !(lo < jet.value && jet.value < hi) {
                stats.record_status(SampleStatus::ExcludedSingular);
                continue;
            }
        }
        let Ok(slope) = dphi.eval_at(&[jet.value]) else {
            stats.record_status(SampleStatus::EvalError);
            continue;
        };
        let cube = slope.powi(3);
        let (res, scale) = worst_pair(pairs(n).into_iter().map(|(i, j)| {
            let (lhs, lhs_scale) = flex_terms(&cjet, i, j);
            let (rhs, rhs_scale) = flex_terms(&jet, i, j);
            (lhs - cube * rhs, lhs_scale.max(cube.abs() * rhs_scale))
        }));
        stats.record(&p, res, scale);
    }
    stats.summarize(opts)
}

/// Unit vector tangent to the level set through `jet` (Euclidean-orthogonal
/// to the gradient), oriented away from the origin.
pub fn level_set_tangent(jet: &Jet, point: &[f64]) -> Vec<f64> {
    let n = jet.grad.len();
    let axis = (0..n)
        .min_by(|&a, &b| jet.grad[a].abs().total_cmp(&jet.grad[b].abs()))
        .unwrap_or(0);
    let g2: f64 = jet.grad.iter().map(|g| g * g).sum();
    let mut v: Vec<f64> = (0..n)
        .map(|k| (if k == axis { 1.0 } else { 0.0 }) - jet.grad[axis] / g2 * jet.grad[k])
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let outward: f64 = v.iter().zip(point).map(|(a, b)| a * b).sum();
    let sign = if outward < 0.0 { -1.0 } else { 1.0 };
    v.iter_mut().for_each(|x| *x *= sign / norm);
    v
}

/// Launches a geodesic of `conn` tangent to the level set from each plan
/// point and records `max_t |f(x(t)) − f(x(0))|` with scale `1 + |f(x(0))|`.
pub fn geodesic_oracle_check(
    field: &dyn ScalarField,
    conn: &Connection,
    plan: &SamplePlan,
    duration: f64,
    steps: usize,
    opts: &CheckOptions,
) -> CheckSummary {
    let mut stats = ResidualStats::new();
    for p in plan.points() {
        let jet = match jet_status(field, plan, &p) {
            Ok(jet) if !is_critical(&jet, opts) => jet,
            Ok(_) => {
                stats.record_status(SampleStatus::ExcludedSingular);
                continue;
            }
            Err(status) => {
                stats.record_status(status);
                continue;
            }
        };
        let v0 = level_set_tangent(&jet, &p);
        let drift = integrate_geodesic(conn, &p, &v0, duration, steps)
            .ok()
            .filter(|path| path.truncated.is_none())
            .and_then(|path| {
                path.points.iter().try_fold(0.0f64, |worst, x| {
                    field.value(x).ok().map(|v| worst.max((v - jet.value).abs()))
                })
            });
        match drift {
            Some(d) => stats.record(&p, d, 1.0 + jet.value.abs()),
            None => stats.record_status(SampleStatus::EvalError),
        }
    }
    stats.summarize(opts)
}

impl From<FieldError> for SampleStatus {
    fn from(_: FieldError) -> Self {
        SampleStatus::EvalError
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::{constant_curvature_connection, hypersurface_connection, HypersurfaceDenominator};

    const CONE_F4: &str = "(x2-1+sqrt((x2-1)^2-4*x1*x3))/(2*x1)";

    fn numeric_hessian_flex(f: &Expr, p: &[f64], i: usize, j: usize) -> f64 {
        // Brute-force derivatives by central differences.
        let h = 1e-4;
        let at = |d: &[(usize, f64)]| {
            let mut q = p.to_vec();
            for &(k, s) in d {
                q[k] += s;
            }
            f.eval_at(&q).unwrap()
        };
        let fi = (at(&[(i, h)]) - at(&[(i, -h)])) / (2.0 * h);
        let fj = (at(&[(j, h)]) - at(&[(j, -h)])) / (2.0 * h);
        let fii = (at(&[(i, h)]) - 2.0 * at(&[]) + at(&[(i, -h)])) / (h * h);
        let fjj = (at(&[(j, h)]) - 2.0 * at(&[]) + at(&[(j, -h)])) / (h * h);
        let fij = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
            + at(&[(i, -h), (j, -h)]))
            / (4.0 * h * h);
        fj * fj * fii - 2.0 * fi * fj * fij + fi * fi * fjj
    }

    #[test]
    fn flex_of_linear_function_vanishes() {
        let f = parse("3*x1 - 2*x2 + 0.5*x3", 3).unwrap();
        for (i, j) in pairs(3) {
            assert_eq!(flex(&f, i, j, &[0.3, 0.7, -1.1]).unwrap(), 0.0);
        }
    }

    #[test]
    fn flex_of_paraboloid_function() {
        let f = parse("x1^2 + x2^2", 2).unwrap();
        assert_eq!(flex(&f, 0, 1, &[1.0, 1.0]).unwrap(), 16.0);
        let brute = numeric_hessian_flex(&f, &[1.0, 1.0], 0, 1);
        assert!((brute - 16.0).abs() < 1e-5);
    }

    #[test]
    fn flex_of_cone_web_function_vanishes() {
        let f = parse(CONE_F4, 3).unwrap();
        for (i, j) in pairs(3) {
            assert!(flex(&f, i, j, &[1.0, 4.0, 1.0]).unwrap().abs() <= 1e-9);
        }
    }

    #[test]
    fn flex_slot_identities() {
        let f = parse("x1^3*x2 + sqrt(x2 + x3^2)", 3).unwrap();
        let p = [0.4, 1.2, -0.7];
        assert_eq!(flex(&f, 1, 1, &p).unwrap(), 0.0);
        assert_eq!(flex(&f, 0, 2, &p).unwrap(), flex(&f, 2, 0, &p).unwrap());
    }

    #[test]
    fn linear_function_has_zero_flat_residual() {
        let f = parse("x1 + 2*x2", 2).unwrap();
        let s = geodesic_residual(&f, &Connection::flat(2), 0, 1, &[0.3, 0.2]);
        assert_eq!(s.residual, Some(0.0));
        assert_eq!(s.status, SampleStatus::Ok);
    }

    #[test]
    fn central_lines_are_geodesic_in_constant_curvature() {
        let f = parse("x2/x1", 2).unwrap();
        let conn = constant_curvature_connection(1.0, 2);
        let s = geodesic_residual(&f, &conn, 0, 1, &[1.0, 2.0]);
        assert!(s.residual.unwrap().abs() < 1e-14);
        for kappa in [-0.5, 0.3, 1.0, 2.0] {
            let s = constant_curvature_residual(&f, kappa, 0, 1, &[1.0, 3.0]);
            assert!(s.residual.unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn zero_curvature_reduces_to_flex() {
        let f = parse("x1^2 + x1*x2^3", 2).unwrap();
        let p = [0.7, -0.4];
        let s = constant_curvature_residual(&f, 0.0, 0, 1, &p);
        assert_eq!(s.residual.unwrap(), flex(&f, 0, 1, &p).unwrap());
    }

    #[test]
    fn paraboloid_meridians_are_geodesic() {
        let f = parse("x2/x1", 2).unwrap();
        let u = parse("x1^2 + x2^2", 2).unwrap();
        let s = hypersurface_residual(&f, &u, 0, 1, &[1.0, 2.0]);
        assert!(s.residual.unwrap().abs() < 1e-14);
        let conn = hypersurface_connection(&u, 2, HypersurfaceDenominator::Derived);
        let g = geodesic_residual(&f, &conn, 0, 1, &[1.0, 2.0]);
        assert!(g.residual.unwrap().abs() < 1e-14);
    }

    #[test]
    fn linear_graph_reduces_to_flex() {
        let f = parse("x1*x2^2", 2).unwrap();
        let u = parse("3*x1 - x2", 2).unwrap();
        let p = [0.5, 1.5];
        let s = hypersurface_residual(&f, &u, 0, 1, &p);
        assert_eq!(s.residual.unwrap(), flex(&f, 0, 1, &p).unwrap());
    }

    #[test]
    fn off_meridian_function_on_paraboloid() {
        // f = x1 + x2² at (1, 1): f_1 = 1, f_2 = 2, f_22 = 2, Flex = 1·2 = 2;
        // u·∇f = 2 + 4 = 6, W = 9, weighted flex = 4·2 + 1·2 = 10.
        let f = parse("x1 + x2^2", 2).unwrap();
        let u = parse("x1^2 + x2^2", 2).unwrap();
        let s = hypersurface_residual(&f, &u, 0, 1, &[1.0, 1.0]);
        let expected = 2.0 - 6.0 / 9.0 * 10.0;
        assert!((s.residual.unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn singular_gradient_guard_on_general_residual() {
        let f = parse("x1", 2).unwrap();
        let s = geodesic_residual(&f, &Connection::flat(2), 0, 1, &[0.5, 0.5]);
        assert_eq!(s.status, SampleStatus::ExcludedSingular);
        assert!(s.residual.is_none());
    }

    #[test]
    fn hyperplanarity_verdicts() {
        let plan = SamplePlan::new(vec![(0.1, 0.3), (0.1, 0.3), (0.5, 1.5)]).with_grid(5);
        let opts = CheckOptions::default();
        let linear = WebFunction::new(parse("x1 + x2 - x3", 3).unwrap(), 3);
        let s = hyperplanarity_check(&linear, &plan, &opts);
        assert!(s.pass && s.max_abs == 0.0);
        let f4 = WebFunction::new(parse("x3/(1-x1-x2)", 3).unwrap(), 3);
        assert!(hyperplanarity_check(&f4, &plan, &opts).pass);
        let bad = WebFunction::new(parse("x1^2 + x2^2", 3).unwrap(), 3);
        assert!(!hyperplanarity_check(&bad, &plan, &opts).pass);
    }

    #[test]
    fn ratio_identity_for_central_planes() {
        let f = WebFunction::new(parse("x2/x1", 3).unwrap(), 3);
        let plan = SamplePlan::new(vec![(0.5, 1.5), (0.5, 1.5), (-1.0, 1.0)]).with_grid(4);
        let report = ratio_independence_check(
            &f,
            &Geometry::ConstantCurvature { kappa: 1.0 },
            &plan,
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
        assert!(ratio_independence_check(&f, &Geometry::Flat, &plan, &CheckOptions::default()).is_err());
    }

    #[test]
    fn web_check_flags_non_geodesic_function() {
        let web = WebSpec {
            dimension: 2,
            geometry: Geometry::Flat,
            functions: vec![
                ("line".into(), parse("x1 - x2", 2).unwrap()),
                ("bowl".into(), parse("x1^2 + x2^2", 2).unwrap()),
            ],
        };
        let plan = SamplePlan::new(vec![(0.5, 1.5), (0.5, 1.5)]).with_grid(4);
        let report = geodesic_web_check(&web, &plan, &CheckOptions::default()).unwrap();
        assert!(report.functions[0].pass);
        assert!(!report.functions[1].pass);
        assert!(!report.pass);
        let s = &report.functions[0].pairs[0].summary;
        assert_eq!(s.total, plan.points().len());
    }

    #[test]
    fn reparametrization_cubes_the_slope() {
        let f = parse("x1^2 + x2*x3", 3).unwrap();
        let plan = SamplePlan::new(vec![(0.5, 1.0); 3]).with_grid(3);
        let phi = crate::expr::parse_univariate("t^3 + t").unwrap();
        let s = reparametrization_check(&f, &phi, None, 3, &plan, &CheckOptions::default());
        assert!(s.pass, "{s:?}");
    }

    #[test]
    fn tangent_is_orthogonal_to_gradient() {
        let f = WebFunction::new(parse("x1 + 2*x2 - x3", 3).unwrap(), 3);
        let p = [0.2, 0.3, 0.4];
        let jet = f.jet(&p).unwrap();
        let v = level_set_tangent(&jet, &p);
        let dot: f64 = v.iter().zip(&jet.grad).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-15);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
