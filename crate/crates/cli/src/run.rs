//! Executes a [`Job`] and assembles its report.

use serde::Serialize;

use geoweb_core::envelope::{
    envelope_of, family_from_web_function, same_equation, verify_tangency, EnvelopeError,
    LinearKind, TangencyOptions, TangencyReport,
};
use geoweb_core::euler::{
    euler_system_check, first_integral_check, commutator_check, jet_cross_check, reconstruct_psi,
    solve_along, Derivatives, DistributionReport, PsiOptions, SolvedField, SolverOptions,
};
use geoweb_core::field::{ScalarField, WebFunction};
use geoweb_core::report::{CheckSummary, ResidualStats, SampleStatus};
use geoweb_core::sampling::SamplePlan;
use geoweb_core::webcheck::{
    geodesic_oracle_check, geodesic_web_check, hyperplanarity_check, pair_implication_check,
    ratio_independence_check, reparametrization_check, Geometry, RatioReport, WebReport,
};

use crate::config::{Job, Relation};

/// Which parts of a job to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sections {
    pub check: bool,
    pub construct: bool,
    pub envelope: bool,
}

impl Sections {
    pub const ALL: Sections = Sections {
        check: true,
        construct: true,
        envelope: true,
    };
    pub const CHECK: Sections = Sections {
        check: true,
        construct: false,
        envelope: false,
    };
    pub const CONSTRUCT: Sections = Sections {
        check: false,
        construct: true,
        envelope: false,
    };
    pub const ENVELOPE: Sections = Sections {
        check: false,
        construct: false,
        envelope: true,
    };
}

#[derive(Clone, Debug, Serialize)]
pub struct DistributionEntry {
    pub function: String,
    pub first_integrals: DistributionReport,
    pub commutator: CheckSummary,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedSummary {
    pub function: String,
    pub summary: CheckSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioEntry {
    pub function: String,
    pub report: RatioReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReparametrizationEntry {
    pub function: String,
    pub phi: String,
    pub summary: CheckSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckSection {
    pub geodesic: WebReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub distribution: Vec<DistributionEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pair_implication: Vec<NamedSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ratio_independence: Vec<RatioEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reparametrization: Vec<ReparametrizationEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub geodesic_oracle: Vec<NamedSummary>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverStats {
    pub solved: usize,
    pub failed: usize,
    pub max_iterations: usize,
    pub mean_iterations: f64,
    /// Largest `|F| / (1 + |f|)` over solved points.
    pub max_relative_defect: f64,
    pub value_range: Option<[f64; 2]>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiSection {
    pub dependence: CheckSummary,
    pub expected: Option<CheckSummary>,
    pub counterexample: Option<(Vec<f64>, Vec<f64>)>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EulerReport {
    pub name: String,
    pub plan_size: usize,
    pub solver: SolverStats,
    /// `None` when every `Ψ_s` is nonvanishing over the solved value range.
    pub psi_vanishing: Option<String>,
    pub euler_system_fd: CheckSummary,
    pub euler_system_ift: CheckSummary,
    pub hyperplanarity: CheckSummary,
    pub jet_cross_check: CheckSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedFormReport>,
    pub psi_reconstruction: PsiSection,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedFormReport {
    pub expression: String,
    pub relation: Relation,
    /// Relative disagreement `|g − rel(f)| / |g|`.
    pub summary: CheckSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    pub equation: String,
    pub a: String,
    pub b: String,
    pub c: String,
    pub stripped_factors: Vec<String>,
    pub parameter_is_square_root_of_level: bool,
    pub planar: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub name: String,
    pub function: String,
    pub family: Option<FamilyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family_match: Option<bool>,
    /// Canonical (primitive, positive leading coefficient) envelope equation.
    pub envelope: Option<String>,
    pub linear_kind: Option<LinearKind>,
    pub expected: Option<String>,
    pub exact_match: Option<bool>,
    pub tangency: Option<TangencyReport>,
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub job: String,
    pub description: String,
    pub dimension: usize,
    pub geometry: String,
    pub seed: u64,
    pub plan_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub euler: Vec<EulerReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub envelopes: Vec<EnvelopeReport>,
    pub pass: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn oracle_plan(plan: &SamplePlan, points: usize) -> SamplePlan {
    let mut p = plan.clone().with_random_points(points);
    p.grid = vec![0; plan.dimension()];
    p
}

fn run_checks(job: &Job) -> CheckSection {
    let tol = &job.tolerances;
    let opts = tol.check(tol.residual);
    let spec = geoweb_core::webcheck::WebSpec {
        dimension: job.dimension,
        geometry: job.geometry.clone(),
        functions: job.web_functions.clone(),
    };
    let geodesic = geodesic_web_check(&spec, &job.plan, &opts).expect("dimensions validated at load");
    let fields: Vec<(String, WebFunction)> = job
        .web_functions
        .iter()
        .map(|(name, e)| (name.clone(), WebFunction::new(e.clone(), job.dimension)))
        .collect();
    let flat = matches!(job.geometry, Geometry::Flat);

    let mut distribution = Vec::new();
    let mut pair_implication = Vec::new();
    if flat {
        for (name, e) in &job.web_functions {
            if job.checks.distribution.includes(name) {
                let first_integrals = first_integral_check(e, job.dimension, &job.plan, &opts);
                let commutator = commutator_check(e, job.dimension, &job.plan, &opts);
                let pass = first_integrals.pass && commutator.pass;
                distribution.push(DistributionEntry {
                    function: name.clone(),
                    first_integrals,
                    commutator,
                    pass,
                });
            }
        }
        if job.checks.pair_implication {
            for (name, f) in &fields {
                pair_implication.push(NamedSummary {
                    function: name.clone(),
                    summary: pair_implication_check(f, &job.plan, (0, 1), &opts),
                });
            }
        }
    }

    let mut ratio_independence = Vec::new();
    if job.checks.ratio_independence && !flat && !matches!(job.geometry, Geometry::Explicit(_)) {
        for (name, f) in &fields {
            let report = ratio_independence_check(f, &job.geometry, &job.plan, &opts)
                .expect("geometry supports the ratio check");
            ratio_independence.push(RatioEntry {
                function: name.clone(),
                report,
            });
        }
    }

    let mut reparametrization = Vec::new();
    for (name, e) in &job.web_functions {
        for r in &job.reparametrizations {
            if r.functions.as_ref().is_some_and(|names| !names.contains(name)) {
                continue;
            }
            let summary = reparametrization_check(e, &r.phi, r.domain, job.dimension, &job.plan, &opts);
            reparametrization.push(ReparametrizationEntry {
                function: name.clone(),
                phi: r.text.clone(),
                summary,
            });
        }
    }

    let mut geodesic_oracle = Vec::new();
    if let Some(o) = &job.checks.oracle {
        let plan = oracle_plan(&job.plan, o.points);
        let oracle_opts = tol.check(tol.oracle);
        for (name, f) in &fields {
            geodesic_oracle.push(NamedSummary {
                function: name.clone(),
                summary: geodesic_oracle_check(f, &job.connection, &plan, o.duration, o.steps, &oracle_opts),
            });
        }
    }

    let pass = geodesic.pass
        && distribution.iter().all(|d| d.pass)
        && pair_implication.iter().all(|d| d.summary.pass)
        && ratio_independence.iter().all(|d| d.report.pass)
        && reparametrization.iter().all(|d| d.summary.pass)
        && geodesic_oracle.iter().all(|d| d.summary.pass);
    CheckSection {
        geodesic,
        distribution,
        pair_implication,
        ratio_independence,
        reparametrization,
        geodesic_oracle,
        pass,
    }
}

/// Sample plan of the `index`-th Euler spec.
pub fn euler_plan(job: &Job, index: usize) -> &SamplePlan {
    job.euler[index].plan.as_ref().unwrap_or(&job.plan)
}

/// The solved field of an Euler job, with the plan's points solved (by
/// continuation when requested).
pub fn solved_field(job: &Job, index: usize) -> SolvedField {
    let e = &job.euler[index];
    let tol = &job.tolerances;
    let options = SolverOptions {
        tolerance: tol.solver,
        max_iterations: tol.solver_max_iterations,
    };
    let field = SolvedField::with_options(e.spec.clone(), e.guess, options);
    if e.continuation {
        let points = euler_plan(job, index).points();
        for (p, s) in points.iter().zip(solve_along(&e.spec, &points, e.guess, &options)) {
            if let Ok(s) = s {
                field.insert(p, s);
            }
        }
    }
    field
}

fn run_euler(job: &Job, index: usize) -> EulerReport {
    let e = &job.euler[index];
    let tol = &job.tolerances;
    let plan = euler_plan(job, index);
    let field = solved_field(job, index);
    let points = plan.points();

    let mut solver = SolverStats {
        solved: 0,
        failed: 0,
        max_iterations: 0,
        mean_iterations: 0.0,
        max_relative_defect: 0.0,
        value_range: None,
        pass: false,
    };
    let mut iterations = 0usize;
    let mut range: Option<(f64, f64)> = None;
    for p in &points {
        match field.solve(p) {
            Ok(s) => {
                solver.solved += 1;
                iterations += s.iterations;
                solver.max_iterations = solver.max_iterations.max(s.iterations);
                solver.max_relative_defect = solver.max_relative_defect.max(s.defect / (1.0 + s.value.abs()));
                range = Some(match range {
                    Some((lo, hi)) => (lo.min(s.value), hi.max(s.value)),
                    None => (s.value, s.value),
                });
            }
            Err(_) => solver.failed += 1,
        }
    }
    if solver.solved > 0 {
        solver.mean_iterations = iterations as f64 / solver.solved as f64;
    }
    solver.value_range = range.map(|(lo, hi)| [lo, hi]);
    solver.pass = solver.solved > 0
        && solver.max_relative_defect <= tol.solver
        && solver.solved as f64 >= tol.min_regular_fraction * points.len() as f64;

    let psi_vanishing = range.and_then(|r| e.spec.check_nonvanishing(r, 101).err().map(|err| err.to_string()));

    let euler_system_fd = euler_system_check(&field, plan, Derivatives::FiniteDifference, &tol.check(tol.euler_fd));
    let euler_system_ift = euler_system_check(&field, plan, Derivatives::ImplicitFunction, &tol.check(tol.euler_ift));
    let hyperplanarity = hyperplanarity_check(&field, plan, &tol.check(tol.solved_hyperplanarity));
    let jet_cross = jet_cross_check(&field, plan, &tol.check(tol.jet_cross_check));

    let closed_form = e.closed_form.as_ref().map(|(g, relation)| {
        let mut stats = ResidualStats::new();
        for p in &points {
            if plan.is_excluded(p) {
                stats.record_status(SampleStatus::ExcludedSingular);
                continue;
            }
            match (field.solve(p), g.eval_at(p)) {
                (Ok(s), Ok(want)) => {
                    let got = relation.apply(s.value);
                    let err = if want == 0.0 { got.abs() } else { (got - want).abs() / want.abs() };
                    stats.record(p, err, 1.0);
                }
                _ => stats.record_status(SampleStatus::EvalError),
            }
        }
        ClosedFormReport {
            expression: g.to_string(),
            relation: *relation,
            summary: stats.summarize(&tol.check(tol.closed_form)),
        }
    });

    let psi = reconstruct_psi(
        &field,
        plan,
        Some(&e.expected_psi),
        &PsiOptions {
            psi_tolerance: tol.psi,
            ..PsiOptions::default()
        },
        &tol.check(tol.psi),
    );
    let psi_reconstruction = PsiSection {
        dependence: psi.dependence,
        expected: psi.expected,
        counterexample: psi.counterexample,
        pass: psi.pass,
    };

    let pass = solver.pass
        && psi_vanishing.is_none()
        && euler_system_fd.pass
        && euler_system_ift.pass
        && hyperplanarity.pass
        && jet_cross.pass
        && closed_form.as_ref().is_none_or(|c| c.summary.pass)
        && psi_reconstruction.pass;
    EulerReport {
        name: e.name.clone(),
        plan_size: points.len(),
        solver,
        psi_vanishing,
        euler_system_fd,
        euler_system_ift,
        hyperplanarity,
        jet_cross_check: jet_cross,
        closed_form,
        psi_reconstruction,
        pass,
    }
}

fn run_envelope(job: &Job, index: usize) -> EnvelopeReport {
    let env = &job.envelopes[index];
    let cfg = &env.config;
    let mut report = EnvelopeReport {
        name: cfg.name.clone(),
        function: cfg.function.clone(),
        family: None,
        family_match: None,
        envelope: None,
        linear_kind: None,
        expected: None,
        exact_match: None,
        tangency: None,
        error: None,
        pass: false,
    };
    let family = match family_from_web_function(&env.function) {
        Ok(f) => f,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.family = Some(FamilyReport {
        equation: family.polynomial().normalized().to_string(),
        a: family.a.to_string(),
        b: family.b.to_string(),
        c: family.c.to_string(),
        stripped_factors: family.stripped.iter().map(|p| p.to_string()).collect(),
        parameter_is_square_root_of_level: family.param_is_square,
        planar: family.is_planar(),
    });
    let family_ok = match &env.expected_family {
        Some(expected) => match expected.expand_to_poly() {
            Ok(p) => {
                let m = same_equation(&family.polynomial(), &p);
                report.family_match = Some(m);
                m
            }
            Err(e) => {
                report.error = Some(format!("expected family: {e}"));
                false
            }
        },
        None => true,
    };
    let expected_kind = cfg.expected_kind.map(LinearKind::from);
    match envelope_of(&family) {
        Ok(poly) => {
            report.envelope = Some(poly.normalized().to_string());
            let matched = match &env.expected {
                Some(expected) => match expected.expand_to_poly() {
                    Ok(p) => {
                        report.expected = Some(p.normalized().to_string());
                        let m = same_equation(&poly, &p);
                        report.exact_match = Some(m);
                        m
                    }
                    Err(e) => {
                        report.error = Some(format!("expected envelope: {e}"));
                        false
                    }
                },
                None => true,
            };
            let opts = TangencyOptions {
                parameter_range: cfg.parameter_range.map_or(TangencyOptions::default().parameter_range, |[a, b]| (a, b)),
                seed: job.plan.seed,
                residual_tolerance: job.tolerances.tangency_residual,
                defect_tolerance: job.tolerances.tangency_defect,
            };
            let tangent = match verify_tangency(&family, &poly, job.dimension, cfg.tangency_samples, &opts) {
                Ok(t) => {
                    let pass = t.pass;
                    report.tangency = Some(t);
                    pass
                }
                Err(e) => {
                    report.error = Some(e.to_string());
                    false
                }
            };
            report.pass = family_ok && matched && tangent && expected_kind.is_none();
        }
        Err(EnvelopeError::Linear(kind)) => {
            report.linear_kind = Some(kind);
            report.pass = family_ok && env.expected.is_none() && expected_kind.is_none_or(|k| k == kind);
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

pub fn run(job: &Job, sections: Sections) -> Report {
    let check = (sections.check && !job.web_functions.is_empty()).then(|| run_checks(job));
    let euler: Vec<EulerReport> = if sections.construct {
        (0..job.euler.len()).map(|k| run_euler(job, k)).collect()
    } else {
        Vec::new()
    };
    let envelopes: Vec<EnvelopeReport> = if sections.envelope {
        (0..job.envelopes.len()).map(|k| run_envelope(job, k)).collect()
    } else {
        Vec::new()
    };
    let ran_something = check.is_some() || !euler.is_empty() || !envelopes.is_empty();
    let pass = ran_something
        && check.as_ref().is_none_or(|c| c.pass)
        && euler.iter().all(|e| e.pass)
        && envelopes.iter().all(|e| e.pass);
    Report {
        job: job.name.clone(),
        description: job.description.clone(),
        dimension: job.dimension,
        geometry: job.geometry_label.clone(),
        seed: job.plan.seed,
        plan_size: job.plan.points().len(),
        check,
        euler,
        envelopes,
        pass,
    }
}

pub struct GridField<'a> {
    pub name: String,
    pub field: Box<dyn ScalarField>,
    pub plan: &'a SamplePlan,
}

/// Fields written to CSV grids: every web function, then every solved
/// Euler field, each with the plan it is sampled on.
pub fn grid_fields(job: &Job) -> Vec<GridField<'_>> {
    let mut out: Vec<GridField<'_>> = job
        .web_functions
        .iter()
        .map(|(name, e)| GridField {
            name: name.clone(),
            field: Box::new(WebFunction::new(e.clone(), job.dimension)),
            plan: &job.plan,
        })
        .collect();
    for k in 0..job.euler.len() {
        out.push(GridField {
            name: job.euler[k].name.clone(),
            field: Box::new(solved_field(job, k)),
            plan: euler_plan(job, k),
        });
    }
    out
}
