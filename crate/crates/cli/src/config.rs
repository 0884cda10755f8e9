//! JSON job configuration and its validation into a runnable [`Job`].

use serde::Deserialize;
use thiserror::Error;

use geoweb_core::envelope::LinearKind;
use geoweb_core::euler::{EulerError, EulerSpec};
use geoweb_core::expr::{parse, parse_univariate, Expr, ParseError};
use geoweb_core::geometry::{
    constant_curvature_connection, hypersurface_connection, Connection, GeometryError,
    HypersurfaceDenominator,
};
use geoweb_core::report::CheckOptions;
use geoweb_core::sampling::{SamplePlan, DEFAULT_RANDOM_POINTS, DEFAULT_SEED};
use geoweb_core::webcheck::Geometry;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{field}: {source}")]
    Expr {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("{field}: {source}")]
    Euler {
        field: String,
        #[source]
        source: EulerError,
    },
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    Flat,
    ConstantCurvature { kappa: f64 },
    Hypersurface { u: String },
    /// `gamma[k][i][j]` is `Γ_ij^k`.
    Explicit { gamma: Vec<Vec<Vec<String>>> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WebFunctionConfig {
    pub name: String,
    pub expr: String,
}

/// How a solved Euler field relates to a printed closed form `g`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `g = f`
    #[default]
    Identity,
    /// `g = −f`
    Negated,
    /// `g = f²`
    Squared,
}

impl Relation {
    pub fn apply(self, f: f64) -> f64 {
        match self {
            Relation::Identity => f,
            Relation::Negated => -f,
            Relation::Squared => f * f,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedFormConfig {
    pub expr: String,
    #[serde(default)]
    pub relation: Relation,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerConfig {
    pub name: String,
    /// Expression in `t`.
    pub u0: String,
    /// `Ψ_1 .. Ψ_{n−1}`, expressions in `t`.
    pub psi: Vec<String>,
    /// Initial guess; pins the solution branch.
    pub guess: f64,
    /// Seed each plan point with the previous solution instead of `guess`.
    #[serde(default)]
    pub continuation: bool,
    #[serde(default)]
    pub closed_form: Option<ClosedFormConfig>,
    /// Expected `Ψ_s` for the reconstruction check; defaults to `psi`.
    #[serde(default)]
    pub expected_psi: Option<Vec<String>>,
    /// Sample box for this construction; defaults to the job's.
    #[serde(default)]
    pub sample: Option<SampleConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub name: String,
    /// Name of a web function of the job.
    pub function: String,
    /// Expected envelope equation (compared up to a nonzero factor).
    #[serde(default)]
    pub expected: Option<String>,
    /// Expected family equation in `x1..xn` and `C`.
    #[serde(default)]
    pub expected_family: Option<String>,
    /// Expected classification when the family is linear in `C`.
    #[serde(default)]
    pub expected_kind: Option<LinearKindConfig>,
    #[serde(default = "default_tangency_samples")]
    pub tangency_samples: usize,
    #[serde(default)]
    pub parameter_range: Option<[f64; 2]>,
}

fn default_tangency_samples() -> usize {
    20
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKindConfig {
    Parallel,
    Pencil,
}

impl From<LinearKindConfig> for LinearKind {
    fn from(k: LinearKindConfig) -> Self {
        match k {
            LinearKindConfig::Parallel => LinearKind::Parallel,
            LinearKindConfig::Pencil => LinearKind::Pencil,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub bounds: Vec<[f64; 2]>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub random_points: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub exclusion_tolerance: Option<f64>,
    /// Singular-locus predicates: points where any of these vanishes are
    /// excluded.
    #[serde(default)]
    pub exclude: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub residual: f64,
    pub singular: f64,
    pub min_regular_fraction: f64,
    pub solver: f64,
    pub solver_max_iterations: usize,
    pub solved_hyperplanarity: f64,
    pub euler_fd: f64,
    pub euler_ift: f64,
    pub jet_cross_check: f64,
    pub closed_form: f64,
    pub psi: f64,
    pub tangency_residual: f64,
    pub tangency_defect: f64,
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-9,
            singular: 1e-8,
            min_regular_fraction: 0.9,
            solver: 1e-12,
            solver_max_iterations: 200,
            solved_hyperplanarity: 1e-8,
            euler_fd: 1e-6,
            euler_ift: 1e-9,
            jet_cross_check: 1e-6,
            closed_form: 1e-9,
            psi: 1e-6,
            tangency_residual: 1e-10,
            tangency_defect: 1e-8,
            oracle: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn check(&self, tolerance: f64) -> CheckOptions {
        CheckOptions {
            tolerance,
            singular_tolerance: self.singular,
            min_regular_fraction: self.min_regular_fraction,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReparametrizationConfig {
    /// Expression in `t`.
    pub phi: String,
    /// Open interval of `f` values where `phi` is used.
    #[serde(default)]
    pub domain: Option<[f64; 2]>,
    /// Web functions to check; all when absent.
    #[serde(default)]
    pub functions: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub duration: f64,
    pub steps: usize,
    /// Number of seeded launch points drawn from the sample box.
    pub points: usize,
}

/// `true`/`false` for every web function or none, or a list of names.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Selection {
    All(bool),
    Named(Vec<String>),
}

impl Default for Selection {
    fn default() -> Self {
        Selection::All(false)
    }
}

impl Selection {
    pub fn includes(&self, name: &str) -> bool {
        match self {
            Selection::All(on) => *on,
            Selection::Named(names) => names.iter().any(|n| n == name),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    /// First-integral and commutator checks of the `X_s` distribution.
    pub distribution: Selection,
    /// If `Flex` vanishes for pair (1,2), it vanishes for all pairs.
    pub pair_implication: bool,
    /// Cross-multiplied `i,j`-independence identity.
    pub ratio_independence: bool,
    pub reparametrizations: Vec<ReparametrizationConfig>,
    pub oracle: Option<OracleConfig>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    pub report: Option<String>,
    pub csv: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub dimension: usize,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub web_functions: Vec<WebFunctionConfig>,
    #[serde(default)]
    pub euler_specs: Vec<EulerConfig>,
    #[serde(default)]
    pub envelopes: Vec<EnvelopeConfig>,
    pub sample: SampleConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }
}

pub struct EulerJob {
    pub name: String,
    pub spec: EulerSpec,
    pub guess: f64,
    pub continuation: bool,
    pub closed_form: Option<(Expr, Relation)>,
    pub expected_psi: Vec<Expr>,
    pub plan: Option<SamplePlan>,
}

pub struct EnvelopeJob {
    pub config: EnvelopeConfig,
    pub function: Expr,
    pub expected: Option<Expr>,
    pub expected_family: Option<Expr>,
}

pub struct Reparametrization {
    pub functions: Option<Vec<String>>,
    pub text: String,
    pub phi: Expr,
    pub domain: Option<(f64, f64)>,
}

/// A validated job: every expression parsed, every index in range.
pub struct Job {
    pub name: String,
    pub description: String,
    pub dimension: usize,
    pub geometry: Geometry,
    pub geometry_label: String,
    pub connection: Connection,
    pub web_functions: Vec<(String, Expr)>,
    pub euler: Vec<EulerJob>,
    pub envelopes: Vec<EnvelopeJob>,
    pub plan: SamplePlan,
    pub tolerances: Tolerances,
    pub checks: ChecksConfig,
    pub reparametrizations: Vec<Reparametrization>,
    pub outputs: OutputsConfig,
}

fn parse_field(text: &str, n: usize, field: impl Into<String>) -> Result<Expr, ConfigError> {
    parse(text, n).map_err(|source| ConfigError::Expr {
        field: field.into(),
        source,
    })
}

fn parse_t(text: &str, field: impl Into<String>) -> Result<Expr, ConfigError> {
    parse_univariate(text).map_err(|source| ConfigError::Expr {
        field: field.into(),
        source,
    })
}

fn build_plan(s: &SampleConfig, n: usize, field: &str) -> Result<SamplePlan, ConfigError> {
    if s.bounds.len() != n {
        return invalid(format!("{field}.bounds needs {n} intervals, got {}", s.bounds.len()));
    }
    if s.bounds.iter().any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return invalid(format!("{field}.bounds must be finite intervals [lo, hi] with lo <= hi"));
    }
    let mut plan = SamplePlan::new(s.bounds.iter().map(|[lo, hi]| (*lo, *hi)).collect())
        .with_random_points(s.random_points.unwrap_or(DEFAULT_RANDOM_POINTS))
        .with_seed(s.seed.unwrap_or(DEFAULT_SEED));
    match &s.grid {
        Some(GridConfig::Uniform(k)) => plan = plan.with_grid(*k),
        Some(GridConfig::PerAxis(counts)) => {
            if counts.len() != n {
                return invalid(format!("{field}.grid needs {n} counts"));
            }
            plan.grid = counts.clone();
        }
        None => {}
    }
    if let Some(t) = s.exclusion_tolerance {
        plan.exclusion_tolerance = t;
    }
    for (k, e) in s.exclude.iter().enumerate() {
        plan = plan.with_exclusion(parse_field(e, n, format!("{field}.exclude[{k}]"))?);
    }
    Ok(plan)
}

impl Job {
    pub fn from_config(config: JobConfig) -> Result<Self, ConfigError> {
        let n = config.dimension;
        if n < 2 {
            return invalid("dimension must be at least 2");
        }
        if config.web_functions.is_empty() && config.euler_specs.is_empty() {
            return invalid("a job needs at least one web function or Euler spec");
        }
        let (geometry, geometry_label, connection) = match &config.geometry {
            GeometryConfig::Flat => (Geometry::Flat, "flat".to_string(), Connection::flat(n)),
            GeometryConfig::ConstantCurvature { kappa } => (
                Geometry::ConstantCurvature { kappa: *kappa },
                format!("constant_curvature(kappa={kappa})"),
                constant_curvature_connection(*kappa, n),
            ),
            GeometryConfig::Hypersurface { u } => {
                let u = parse_field(u, n, "geometry.u")?;
                let conn = hypersurface_connection(&u, n, HypersurfaceDenominator::Derived);
                let label = format!("hypersurface(u={u})");
                (Geometry::Hypersurface { u }, label, conn)
            }
            GeometryConfig::Explicit { gamma } => {
                let table = gamma
                    .iter()
                    .enumerate()
                    .map(|(k, m)| {
                        m.iter()
                            .enumerate()
                            .map(|(i, row)| {
                                row.iter()
                                    .enumerate()
                                    .map(|(j, e)| parse_field(e, n, format!("geometry.gamma[{k}][{i}][{j}]")))
                                    .collect::<Result<Vec<_>, _>>()
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if table.len() != n {
                    return invalid(format!("geometry.gamma must be {n}x{n}x{n}"));
                }
                let conn = Connection::from_table(table)?;
                (Geometry::Explicit(conn.clone()), "explicit".to_string(), conn)
            }
        };

        let mut web_functions = Vec::new();
        for (k, w) in config.web_functions.iter().enumerate() {
            if web_functions.iter().any(|(name, _)| name == &w.name) {
                return invalid(format!("duplicate web function name {:?}", w.name));
            }
            let e = parse_field(&w.expr, n, format!("web_functions[{k}].expr"))?;
            web_functions.push((w.name.clone(), e));
        }

        let mut euler = Vec::new();
        for (k, e) in config.euler_specs.iter().enumerate() {
            let field = format!("euler_specs[{k}]");
            let u0 = parse_t(&e.u0, format!("{field}.u0"))?;
            let psi = e
                .psi
                .iter()
                .enumerate()
                .map(|(s, p)| parse_t(p, format!("{field}.psi[{s}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let spec = EulerSpec::new(u0, psi.clone(), n).map_err(|source| ConfigError::Euler {
                field: field.clone(),
                source,
            })?;
            let closed_form = e
                .closed_form
                .as_ref()
                .map(|c| parse_field(&c.expr, n, format!("{field}.closed_form.expr")).map(|x| (x, c.relation)))
                .transpose()?;
            let expected_psi = match &e.expected_psi {
                Some(list) => {
                    if list.len() != n - 1 {
                        return invalid(format!("{field}.expected_psi needs {} entries", n - 1));
                    }
                    list.iter()
                        .enumerate()
                        .map(|(s, p)| parse_t(p, format!("{field}.expected_psi[{s}]")))
                        .collect::<Result<Vec<_>, _>>()?
                }
                None => psi,
            };
            let plan = e
                .sample
                .as_ref()
                .map(|sc| build_plan(sc, n, &format!("{field}.sample")))
                .transpose()?;
            euler.push(EulerJob {
                name: e.name.clone(),
                plan,
                spec,
                guess: e.guess,
                continuation: e.continuation,
                closed_form,
                expected_psi,
            });
        }

        let mut envelopes = Vec::new();
        for (k, env) in config.envelopes.iter().enumerate() {
            let field = format!("envelopes[{k}]");
            let Some((_, function)) = web_functions.iter().find(|(name, _)| name == &env.function) else {
                return invalid(format!("{field}.function: no web function named {:?}", env.function));
            };
            let expected = env
                .expected
                .as_ref()
                .map(|t| parse_field(t, n, format!("{field}.expected")))
                .transpose()?;
            let expected_family = env
                .expected_family
                .as_ref()
                .map(|t| parse_field(t, n, format!("{field}.expected_family")))
                .transpose()?;
            envelopes.push(EnvelopeJob {
                config: env.clone(),
                function: function.clone(),
                expected,
                expected_family,
            });
        }

        let plan = build_plan(&config.sample, n, "sample")?;
        if let Selection::Named(names) = &config.checks.distribution {
            if let Some(missing) = names.iter().find(|m| !web_functions.iter().any(|(w, _)| &w == m)) {
                return invalid(format!("checks.distribution: no web function named {missing:?}"));
            }
        }

        let reparametrizations = config
            .checks
            .reparametrizations
            .iter()
            .enumerate()
            .map(|(k, r)| {
                if let Some(missing) = r
                    .functions
                    .iter()
                    .flatten()
                    .find(|m| !web_functions.iter().any(|(w, _)| &w == m))
                {
                    return invalid(format!("checks.reparametrizations[{k}]: no web function named {missing:?}"));
                }
                Ok(Reparametrization {
                    functions: r.functions.clone(),
                    text: r.phi.clone(),
                    phi: parse_t(&r.phi, format!("checks.reparametrizations[{k}].phi"))?,
                    domain: r.domain.map(|[lo, hi]| (lo, hi)),
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        if let Some(o) = &config.checks.oracle {
            if o.steps == 0 || !(o.duration > 0.0) {
                return invalid("checks.oracle needs positive duration and steps");
            }
        }

        Ok(Job {
            name: config.name.clone().unwrap_or_else(|| "job".into()),
            description: config.description.clone().unwrap_or_default(),
            dimension: n,
            geometry,
            geometry_label,
            connection,
            web_functions,
            euler,
            envelopes,
            plan,
            tolerances: config.tolerances.clone(),
            checks: config.checks.clone(),
            reparametrizations,
            outputs: config.outputs.clone(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Job::from_config(JobConfig::from_json(text)?)
    }
}
