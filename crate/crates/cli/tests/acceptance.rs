//! Acceptance suite: one PASS/FAIL line per criterion. Every tolerance used
//! below is pinned here.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geoweb_cli::config::Job;
use geoweb_cli::corpus;
use geoweb_cli::run::{euler_plan, solved_field};
use geoweb_core::envelope::{envelope_of, family_from_web_function, same_equation};
use geoweb_core::euler::{
    cleared_x_of_a, commutator_check, euler_system_check, first_integral_check, implicit_solve,
    reconstruct_psi, Derivatives, EulerSpec, PsiOptions, SolvedField,
};
use geoweb_core::expr::{parse, parse_univariate, Expr};
use geoweb_core::field::{ScalarField, WebFunction};
use geoweb_core::geometry::{
    christoffel_from_metric, constant_curvature_connection, hypersurface_connection,
    integrate_geodesic, self_convergence_order, Connection, HypersurfaceDenominator, Metric,
};
use geoweb_core::report::CheckOptions;
use geoweb_core::sampling::SamplePlan;
use geoweb_core::webcheck::{
    flex, geodesic_residual, hyperplanarity_check, level_set_tangent, pair_implication_check,
    ratio_independence_check, reparametrization_check, Geometry,
};

const SEED: u64 = 20_240_601;

// Criterion 1
const FLEX_ORACLE_STEP: f64 = 1e-4;
const FLEX_ORACLE_TOL: f64 = 1e-5;
const FLEX_ALGEBRA_BUDGET: Duration = Duration::from_secs(1);
// Criterion 3
const CHRISTOFFEL_TOL: f64 = 1e-10;
// Criteria 4, 5
const PRINTED_FLEX_TOL: f64 = 1e-8;
const EXAMPLE1_MIN_REGULAR: usize = 100;
const EXAMPLE1_BUDGET: Duration = Duration::from_secs(5);
// Criterion 6
const CLOSED_FORM_TOL: f64 = 1e-9;
const CLOSED_FORM_POINTS: usize = 50;
const PSI_TOL: f64 = 1e-6;
// Criterion 7
const EULER_FD_TOL: f64 = 1e-6;
const EULER_IFT_TOL: f64 = 1e-9;
// Criteria 8, 9, 11
const RESIDUAL_TOL: f64 = 1e-9;
/// Smallest cleared value the negative control must reach somewhere.
const CONTROL_NONZERO: f64 = 1e-3;
// Criterion 10
const ORACLE_DRIFT_TOL: f64 = 1e-6;
const ORACLE_DURATION: f64 = 1.0;
const ORACLE_STEPS: usize = 1000;
const ORACLE_LAUNCHES: usize = 10;
const RK4_MIN_ORDER: f64 = 3.8;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn opts(tolerance: f64) -> CheckOptions {
    CheckOptions::with_tolerance(tolerance)
}

fn corpus_jobs() -> Vec<Job> {
    corpus::ENTRIES.iter().map(|e| e.job().expect("bundled job loads")).collect()
}

fn random_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn seeded_points(bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect())
        .collect()
}

/// Random polynomial / radical / rational expression in `x1..x3`, positive
/// radicands and denominators on `[0.5, 1.5]^3`.
fn random_expression(rng: &mut ChaCha8Rng) -> String {
    let mut monomial = |rng: &mut ChaCha8Rng| {
        let c = rng.random_range(-3..=3);
        let c = if c == 0 { 1 } else { c };
        let mut s = c.to_string();
        for k in 1..=3 {
            let e = rng.random_range(0..=3);
            if e > 0 {
                s.push_str(&format!("*x{k}^{e}"));
            }
        }
        s
    };
    let poly = |rng: &mut ChaCha8Rng, m: &mut dyn FnMut(&mut ChaCha8Rng) -> String| {
        let terms = rng.random_range(1..=3);
        (0..terms).map(|_| m(rng)).collect::<Vec<_>>().join("+")
    };
    let squares = |rng: &mut ChaCha8Rng| {
        let k = rng.random_range(1..=3);
        let j = rng.random_range(1..=3);
        format!("1+x{k}^2+x{k}*x{j}")
    };
    match rng.random_range(0..4) {
        0 => poly(rng, &mut monomial),
        1 => format!("{}*sqrt({})", poly(rng, &mut monomial), squares(rng)),
        2 => format!("({})/({})", poly(rng, &mut monomial), squares(rng)),
        _ => format!("sqrt({})+{}", squares(rng), poly(rng, &mut monomial)),
    }
}

/// Flex from central differences of the expression's values alone.
fn flex_fd(f: &Expr, i: usize, j: usize, p: &[f64]) -> (f64, f64) {
    let h = FLEX_ORACLE_STEP;
    let at = |di: f64, dj: f64| {
        let mut q = p.to_vec();
        q[i] += di;
        q[j] += dj;
        f.eval_at(&q).unwrap()
    };
    let at1 = |k: usize, d: f64| {
        let mut q = p.to_vec();
        q[k] += d;
        f.eval_at(&q).unwrap()
    };
    let f0 = f.eval_at(p).unwrap();
    let fi = (at1(i, h) - at1(i, -h)) / (2.0 * h);
    let fj = (at1(j, h) - at1(j, -h)) / (2.0 * h);
    let fii = (at1(i, h) - 2.0 * f0 + at1(i, -h)) / (h * h);
    let fjj = (at1(j, h) - 2.0 * f0 + at1(j, -h)) / (h * h);
    let fij = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
    let terms = [fj * fj * fii, 2.0 * fi * fj * fij, fi * fi * fjj];
    (terms[0] - terms[1] + terms[2], terms.iter().map(|t| t.abs()).sum::<f64>().max(1.0))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_fd: f64 = 0.0;
    for _ in 0..50 {
        let text = random_expression(&mut rng);
        let f = parse(&text, 3).map_err(|e| format!("{text}: {e}"))?;
        let p = random_point(&mut rng, 0.5, 1.5, 3);
        for i in 0..3 {
            let d = flex(&f, i, i, &p).map_err(|e| e.to_string())?;
            ensure(d == 0.0, || format!("Flex_{i}{i}({text}) = {d}"))?;
            for j in 0..3 {
                let a = flex(&f, i, j, &p).map_err(|e| e.to_string())?;
                let b = flex(&f, j, i, &p).map_err(|e| e.to_string())?;
                ensure(a == b, || format!("Flex_{i}{j} != Flex_{j}{i} for {text}: {a} vs {b}"))?;
                if i != j {
                    let (want, scale) = flex_fd(&f, i, j, &p);
                    let err = (a - want).abs() / scale;
                    worst_fd = worst_fd.max(err);
                    ensure(err <= FLEX_ORACLE_TOL, || format!("{text}: Flex_{i}{j} = {a}, difference oracle {want}"))?;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < FLEX_ALGEBRA_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("50 expressions, exact symmetry, max deviation from difference oracle {worst_fd:.1e}, {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    for k in 0..20 {
        let n = [2, 3, 4][k % 3];
        let coeffs: Vec<i64> = (0..=n).map(|_| rng.random_range(-9..=9)).collect();
        let text = (0..n)
            .map(|s| format!("{}*x{}", coeffs[s], s + 1))
            .chain(std::iter::once(coeffs[n].to_string()))
            .collect::<Vec<_>>()
            .join("+");
        let f = parse(&text, n).map_err(|e| e.to_string())?;
        let flat = Connection::flat(n);
        for _ in 0..5 {
            let p = random_point(&mut rng, -2.0, 2.0, n);
            for i in 0..n {
                for j in 0..n {
                    let v = flex(&f, i, j, &p).map_err(|e| e.to_string())?;
                    ensure(v == 0.0, || format!("Flex_{i}{j}({text}) = {v}"))?;
                    let r = geodesic_residual(&f, &flat, i, j, &p);
                    ensure(r.residual.is_none_or(|r| r == 0.0), || format!("flat residual of {text}: {r:?}"))?;
                }
            }
        }
    }
    Ok("20 linear functions, n in {2,3,4}: Flex and flat residual exactly 0".into())
}

/// Metric entries written out independently of the library's constructors.
fn conformal_metric(kappa: f64, n: usize) -> Metric {
    let r2 = (1..=n).map(|k| format!("x{k}^2")).collect::<Vec<_>>().join("+");
    let diag = parse(&format!("1/(1+({kappa})*({r2}))^2"), n).unwrap();
    Metric::new(
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag.clone() } else { Expr::zero() }).collect())
            .collect(),
    )
    .unwrap()
}

fn graph_metric(u: &str, m: usize) -> Metric {
    let u = parse(u, m).unwrap();
    let g: Vec<Expr> = (0..m).map(|k| u.diff_x(k)).collect();
    Metric::new(
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let p = &g[i.min(j)] * &g[i.max(j)];
                        if i == j {
                            Expr::one() + p
                        } else {
                            p
                        }
                    })
                    .collect()
            })
            .collect(),
    )
    .unwrap()
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut compare = |closed: &Connection, metric: &Metric, label: &str, seed: u64| -> Result<(), String> {
        let reference = christoffel_from_metric(metric);
        let n = closed.dimension();
        for p in seeded_points(&vec![(-0.5, 0.5); n], 100, seed) {
            let a = closed.eval(&p).map_err(|e| e.to_string())?;
            let b = reference.eval(&p).map_err(|e| e.to_string())?;
            let d = a.max_abs_diff(&b);
            worst = worst.max(d);
            ensure(d <= CHRISTOFFEL_TOL, || format!("{label} at {p:?}: {d:.3e}"))?;
        }
        Ok(())
    };
    for kappa in [-0.5, 0.0, 1.0, 2.0] {
        for n in [2, 3] {
            compare(
                &constant_curvature_connection(kappa, n),
                &conformal_metric(kappa, n),
                &format!("kappa={kappa}, n={n}"),
                SEED + n as u64,
            )?;
        }
    }
    for (u, m) in [("x1^2", 1), ("x1^2", 2), ("x1^2+x2^2", 2), ("x1*x2", 2)] {
        let conn = hypersurface_connection(&parse(u, m).unwrap(), m, HypersurfaceDenominator::Derived);
        compare(&conn, &graph_metric(u, m), &format!("u={u}, m={m}"), SEED + 7)?;
    }
    Ok(format!("closed forms vs metric-derived symbols, max difference {worst:.1e}"))
}

const CONE_PLUS: &str = "(x2-1+sqrt((x2-1)^2-4*x1*x3))/(2*x1)";
const CONE_MINUS: &str = "(x2-1-sqrt((x2-1)^2-4*x1*x3))/(2*x1)";
const CYL2_PLUS: &str = "((1+sqrt(1-4*x2*(x1+x3)))/(2*x2))^2";
const CYL2_MINUS: &str = "((1-sqrt(1-4*x2*(x1+x3)))/(2*x2))^2";
const CYL3_PLUS: &str = "((1+sqrt(1-4*x1*(x2+x3)))/(2*x1))^2";
const CYL3_MINUS: &str = "((1-sqrt(1-4*x1*(x2+x3)))/(2*x1))^2";
const PENCIL: &str = "x3/(1-x1-x2)";

/// Max absolute cleared Flex over all pairs and regular points.
fn printed_flex(text: &str, plan: &SamplePlan) -> Result<(f64, usize), String> {
    let field = WebFunction::new(parse(text, 3).unwrap(), 3);
    let mut worst: f64 = 0.0;
    let mut regular = 0;
    for p in plan.points() {
        let Ok(jet) = field.jet(&p) else { continue };
        regular += 1;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            worst = worst.max(geoweb_core::webcheck::flex_at(&jet, i, j).abs());
        }
    }
    // The library check must agree.
    let summary = hyperplanarity_check(&field, plan, &CheckOptions { min_regular_fraction: 0.0, ..opts(PRINTED_FLEX_TOL) });
    ensure(summary.max_abs <= PRINTED_FLEX_TOL && summary.ok > 0, || format!("{text}: {summary:?}"))?;
    Ok((worst, regular))
}

fn envelope_matches(function: &str, expected: &str) -> Result<String, String> {
    let family = family_from_web_function(&parse(function, 3).unwrap()).map_err(|e| e.to_string())?;
    let env = envelope_of(&family).map_err(|e| e.to_string())?;
    let want = parse(expected, 3).unwrap().expand_to_poly().map_err(|e| e.to_string())?;
    ensure(same_equation(&env, &want), || format!("envelope {env} != {want}"))?;
    Ok(env.normalized().to_string())
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let plan = SamplePlan::new(vec![(0.5, 1.5), (3.0, 5.0), (0.5, 1.5)]);
    let mut detail = Vec::new();
    for text in [CONE_PLUS, CONE_MINUS] {
        let (worst, regular) = printed_flex(text, &plan)?;
        ensure(regular >= EXAMPLE1_MIN_REGULAR, || format!("only {regular} regular points"))?;
        ensure(worst <= PRINTED_FLEX_TOL, || format!("{text}: max |Flex| {worst:.3e}"))?;
        detail.push(format!("{worst:.1e} over {regular} pts"));
    }
    let env = envelope_matches(CONE_PLUS, "x2^2-4*x1*x3-2*x2+1")?;
    let elapsed = start.elapsed();
    ensure(elapsed < EXAMPLE1_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("max |Flex| {}; envelope {env} = 0; {elapsed:.2?}", detail.join(", ")))
}

fn criterion_5() -> Outcome {
    let plan = SamplePlan::new(vec![(0.05, 0.15), (0.4, 0.6), (0.05, 0.15)]);
    let mut detail = Vec::new();
    for text in [CYL2_PLUS, CYL2_MINUS] {
        let (worst, regular) = printed_flex(text, &plan)?;
        ensure(regular == plan.points().len(), || format!("{text}: evaluation errors on a positive-radicand box"))?;
        ensure(worst <= PRINTED_FLEX_TOL, || format!("{text}: max |Flex| {worst:.3e}"))?;
        detail.push(format!("{worst:.1e}"));
    }
    let env = envelope_matches(CYL2_MINUS, "4*x1*x2+4*x2*x3-1")?;
    Ok(format!("max |Flex| {}; envelope {env} = 0", detail.join(", ")))
}

fn spec(u0: &str, psi: &[&str]) -> EulerSpec {
    EulerSpec::new(
        parse_univariate(u0).unwrap(),
        psi.iter().map(|p| parse_univariate(p).unwrap()).collect(),
        3,
    )
    .unwrap()
}

fn criterion_6() -> Outcome {
    let bounds = vec![(0.05, 0.15); 3];
    let plan = SamplePlan::new(bounds.clone());
    let mut worst_flex: f64 = 0.0;
    for text in [CONE_PLUS, CONE_MINUS, CYL2_PLUS, CYL2_MINUS, CYL3_PLUS, CYL3_MINUS, PENCIL] {
        let field = WebFunction::new(parse(text, 3).unwrap(), 3);
        let s = hyperplanarity_check(&field, &plan, &opts(RESIDUAL_TOL));
        ensure(s.pass && s.ok == s.total, || format!("{text}: {s:?}"))?;
        worst_flex = worst_flex.max(s.max_scaled);
    }

    // (printed closed form, spec, guess, printed value from solved value)
    let cases: [(&str, EulerSpec, f64, fn(f64) -> f64); 4] = [
        (CONE_PLUS, spec("t", &["t^2", "t"]), 0.0, |f| -f),
        (CYL2_MINUS, spec("t", &["1", "t^2"]), 0.0, |f| f * f),
        (CYL3_MINUS, spec("t^2", &["t", "1"]), 0.0, |f| f),
        (PENCIL, spec("t", &["t", "t"]), 1.0, |f| f),
    ];
    let points = seeded_points(&bounds, CLOSED_FORM_POINTS, SEED + 6);
    let mut worst_closed: f64 = 0.0;
    let mut worst_psi: f64 = 0.0;
    for (k, (printed, s, guess, relate)) in cases.iter().enumerate() {
        let g = parse(printed, 3).unwrap();
        for p in &points {
            let solved = implicit_solve(s, p, *guess).map_err(|e| format!("spec {}: {e}", k + 1))?;
            let want = g.eval_at(p).unwrap();
            let err = (relate(solved) - want).abs() / want.abs();
            worst_closed = worst_closed.max(err);
            ensure(err <= CLOSED_FORM_TOL, || format!("spec {} at {p:?}: relative error {err:.3e}", k + 1))?;
        }
        let field = SolvedField::new(s.clone(), *guess);
        let rec = reconstruct_psi(&field, &plan, Some(s.psi()), &PsiOptions { psi_tolerance: PSI_TOL, ..PsiOptions::default() }, &opts(PSI_TOL));
        let expected = rec.expected.as_ref().ok_or("no expected-Psi summary")?;
        worst_psi = worst_psi.max(expected.max_scaled).max(rec.dependence.max_scaled);
        ensure(rec.pass, || format!("spec {}: Psi reconstruction {:?}", k + 1, rec.counterexample))?;
    }
    Ok(format!(
        "max scaled Flex {worst_flex:.1e}; closed forms {worst_closed:.1e} relative at {CLOSED_FORM_POINTS} pts each; Psi {worst_psi:.1e}"
    ))
}

fn criterion_7() -> Outcome {
    let mut count = 0;
    let (mut fd, mut ift): (f64, f64) = (0.0, 0.0);
    for job in corpus_jobs() {
        for k in 0..job.euler.len() {
            let field = solved_field(&job, k);
            let plan = euler_plan(&job, k);
            let label = format!("{}/{}", job.name, job.euler[k].name);
            let a = euler_system_check(&field, plan, Derivatives::FiniteDifference, &opts(EULER_FD_TOL));
            let b = euler_system_check(&field, plan, Derivatives::ImplicitFunction, &opts(EULER_IFT_TOL));
            ensure(a.pass, || format!("{label} finite differences: {a:?}"))?;
            ensure(b.pass, || format!("{label} implicit derivatives: {b:?}"))?;
            fd = fd.max(a.max_scaled);
            ift = ift.max(b.max_scaled);
            count += 1;
        }
    }
    Ok(format!("{count} solved fields; max residual {fd:.1e} (differences), {ift:.1e} (implicit)"))
}

fn criterion_8() -> Outcome {
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for job in corpus_jobs() {
        if !matches!(job.geometry, Geometry::Flat) {
            continue;
        }
        for (name, f) in &job.web_functions {
            if !job.checks.distribution.includes(name) {
                continue;
            }
            let fi = first_integral_check(f, job.dimension, &job.plan, &opts(RESIDUAL_TOL));
            let comm = commutator_check(f, job.dimension, &job.plan, &opts(RESIDUAL_TOL));
            ensure(fi.pass && comm.pass, || format!("{}/{name}: {fi:?} {comm:?}", job.name))?;
            worst = worst.max(fi.x_of_a.max_scaled).max(fi.x_of_f.max_scaled).max(comm.max_scaled);
            count += 1;
        }
    }
    ensure(count >= 9, || format!("only {count} hyperplanar functions checked"))?;

    let control = parse("x1^2+x2^2+x3", 3).unwrap();
    let field = WebFunction::new(control.clone(), 3);
    let plan = SamplePlan::new(vec![(0.5, 1.5); 3]);
    let mut x_of_a: f64 = 0.0;
    for p in plan.points() {
        let jet = field.jet(&p).unwrap();
        x_of_a = x_of_a.max(cleared_x_of_a(&jet, 0, 1).0.abs());
    }
    let comm = commutator_check(&control, 3, &plan, &opts(RESIDUAL_TOL));
    let fi = first_integral_check(&control, 3, &plan, &opts(RESIDUAL_TOL));
    ensure(x_of_a >= CONTROL_NONZERO, || format!("control X_1(A_2) max {x_of_a:.3e}"))?;
    ensure(comm.max_abs >= CONTROL_NONZERO && !comm.pass, || format!("control commutator {comm:?}"))?;
    ensure(!fi.pass, || "control passes the first-integral check".into())?;
    Ok(format!(
        "{count} hyperplanar functions, max {worst:.1e}; control x1^2+x2^2+x3: X_1(A_2) up to {x_of_a:.2}, commutator up to {:.2}",
        comm.max_abs
    ))
}

fn criterion_9() -> Outcome {
    let phis: [(&str, Option<(f64, f64)>); 3] = [("t^2", None), ("t^3+t", None), ("1/t", Some((0.1, f64::MAX)))];
    let mut checked = [0usize; 3];
    let mut worst: f64 = 0.0;
    for job in corpus_jobs() {
        for (name, f) in &job.web_functions {
            for (k, (phi, domain)) in phis.iter().enumerate() {
                let phi_e = parse_univariate(phi).unwrap();
                let o = CheckOptions { min_regular_fraction: 0.0, ..opts(RESIDUAL_TOL) };
                let s = reparametrization_check(f, &phi_e, *domain, job.dimension, &job.plan, &o);
                ensure(s.max_scaled <= RESIDUAL_TOL, || format!("{}/{name}, phi={phi}: {s:?}", job.name))?;
                worst = worst.max(s.max_scaled);
                checked[k] += s.ok;
            }
        }
    }
    ensure(checked.iter().all(|&c| c >= 100), || format!("too few points: {checked:?}"))?;
    Ok(format!("all corpus web functions, max relative defect {worst:.1e}, points per phi {checked:?}"))
}

/// Launches geodesics tangent to level sets and returns the largest drift of
/// `f` relative to `1 + |f(x0)|`.
fn drift(f: &WebFunction, conn: &Connection, launches: &[Vec<f64>]) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for x0 in launches {
        let jet = f.jet(x0).map_err(|e| e.to_string())?;
        let v0 = level_set_tangent(&jet, x0);
        // The tangent must really be tangent.
        let dot: f64 = v0.iter().zip(&jet.grad).map(|(a, b)| a * b).sum();
        ensure(dot.abs() <= 1e-12 * jet.grad_norm().max(1.0), || format!("launch velocity not tangent: {dot:e}"))?;
        let path = integrate_geodesic(conn, x0, &v0, ORACLE_DURATION, ORACLE_STEPS).map_err(|e| e.to_string())?;
        ensure(path.truncated.is_none(), || format!("geodesic from {x0:?} truncated"))?;
        for x in &path.points {
            let d = (f.value(x).map_err(|e| e.to_string())? - jet.value).abs() / (1.0 + jet.value.abs());
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

fn criterion_10() -> Outcome {
    let mut parts = Vec::new();
    let cases: [(&str, usize, Connection, Geometry, Vec<(f64, f64)>); 2] = [
        (
            "x2/x1",
            3,
            constant_curvature_connection(1.0, 3),
            Geometry::ConstantCurvature { kappa: 1.0 },
            vec![(0.5, 1.5), (-0.5, 0.5), (-0.5, 0.5)],
        ),
        (
            "x2/x1",
            2,
            hypersurface_connection(&parse("x1^2+x2^2", 2).unwrap(), 2, HypersurfaceDenominator::Derived),
            Geometry::Hypersurface { u: parse("x1^2+x2^2", 2).unwrap() },
            vec![(0.5, 1.5), (0.5, 1.5)],
        ),
    ];
    for (text, n, conn, geometry, bounds) in cases {
        let f = parse(text, n).unwrap();
        let field = WebFunction::new(f.clone(), n);
        let plan = SamplePlan::new(bounds.clone());
        let geodesic = geoweb_core::webcheck::geodesic_web_check(
            &geoweb_core::webcheck::WebSpec { dimension: n, geometry, functions: vec![("f".into(), f.clone())] },
            &plan,
            &opts(RESIDUAL_TOL),
        )
        .map_err(|e| e.to_string())?;
        let residual = geodesic.functions[0].pairs.iter().map(|p| p.summary.max_abs).fold(0.0, f64::max);
        ensure(geodesic.pass && residual <= RESIDUAL_TOL, || format!("{text}, n={n}: residual {residual:.3e}"))?;
        let launches = seeded_points(&bounds, ORACLE_LAUNCHES, SEED + 10);
        let d = drift(&field, &conn, &launches)?;
        ensure(d <= ORACLE_DRIFT_TOL, || format!("{text}, n={n}: drift {d:.3e}"))?;
        let jet = field.jet(&launches[0]).unwrap();
        let order = self_convergence_order(&conn, &launches[0], &level_set_tangent(&jet, &launches[0]), ORACLE_DURATION, 20)
            .map_err(|e| e.to_string())?;
        ensure(order >= RK4_MIN_ORDER, || format!("{text}, n={n}: RK4 order {order:.2}"))?;
        parts.push(format!("n={n}: residual {residual:.1e}, drift {d:.1e}, order {order:.2}"));
    }
    Ok(parts.join("; "))
}

fn criterion_11() -> Outcome {
    let mut ratio_count = 0;
    let mut pair_count = 0;
    let mut worst: f64 = 0.0;
    for job in corpus_jobs() {
        for (name, f) in &job.web_functions {
            let field = WebFunction::new(f.clone(), job.dimension);
            match &job.geometry {
                Geometry::Flat => {
                    let s = pair_implication_check(&field, &job.plan, (0, 1), &opts(RESIDUAL_TOL));
                    ensure(s.max_scaled <= RESIDUAL_TOL && s.ok > 0, || format!("{}/{name}: {s:?}", job.name))?;
                    worst = worst.max(s.max_scaled);
                    pair_count += 1;
                }
                g @ (Geometry::ConstantCurvature { .. } | Geometry::Hypersurface { .. }) => {
                    let r = ratio_independence_check(&field, g, &job.plan, &opts(RESIDUAL_TOL)).map_err(|e| e.to_string())?;
                    ensure(r.pass, || format!("{}/{name}: {r:?}", job.name))?;
                    worst = worst.max(r.identity.max_scaled);
                    ratio_count += 1;
                }
                Geometry::Explicit(_) => {}
            }
        }
    }
    ensure(ratio_count >= 3 && pair_count >= 10, || format!("ratio {ratio_count}, pair {pair_count}"))?;
    Ok(format!("{ratio_count} curved-geometry functions, {pair_count} flat functions, max {worst:.1e}"))
}

fn criterion_12() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_geoweb");
    let run = |name: &str, seed: &str| {
        Command::new(bin).args(["corpus", "run", name, "--seed", seed]).output().expect("binary runs")
    };
    for e in corpus::ENTRIES {
        let a = run(e.name, "7");
        let b = run(e.name, "7");
        ensure(a.status.success(), || format!("{} failed: {}", e.name, String::from_utf8_lossy(&a.stderr)))?;
        ensure(!a.stdout.is_empty() && a.stdout == b.stdout, || format!("{}: reports differ", e.name))?;
    }
    let other = run("example3-four-web", "8");
    let base = run("example3-four-web", "7");
    ensure(other.stdout != base.stdout, || "seed has no effect".into())?;
    Ok(format!("{} bundled jobs byte-identical across runs", corpus::ENTRIES.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("Flex algebra", criterion_1),
        ("linear functions", criterion_2),
        ("Christoffel cross-check", criterion_3),
        ("Example 1 cone", criterion_4),
        ("Example 2 cylinder", criterion_5),
        ("Example 3 four-web", criterion_6),
        ("Euler system", criterion_7),
        ("distribution facts", criterion_8),
        ("reparametrization covariance", criterion_9),
        ("geodesic ODE oracle", criterion_10),
        ("i,j-independence", criterion_11),
        ("determinism", criterion_12),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
