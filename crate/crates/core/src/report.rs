//! Residual statistics shared by all point-sampled checks.

use serde::Serialize;

/// Outcome of one sampled residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleStatus {
    Ok,
    ExcludedSingular,
    EvalError,
}

/// Tolerances for a sampled check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOptions {
    /// Bound on the scaled residual.
    pub tolerance: f64,
    /// Relative threshold of the singular-gradient guard.
    pub singular_tolerance: f64,
    /// Minimum share of plan points that must be regular.
    pub min_regular_fraction: f64,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_SINGULAR_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MIN_REGULAR_FRACTION: f64 = 0.9;

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tolerance: DEFAULT_TOLERANCE,
            singular_tolerance: DEFAULT_SINGULAR_TOLERANCE,
            min_regular_fraction: DEFAULT_MIN_REGULAR_FRACTION,
        }
    }
}

impl CheckOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        CheckOptions {
            tolerance,
            ..CheckOptions::default()
        }
    }
}

/// Aggregated statistics of a sampled check. Counts always sum to `total`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub total: usize,
    pub ok: usize,
    pub excluded: usize,
    pub errors: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub max_scaled: f64,
    pub tolerance: f64,
    pub worst_point: Option<Vec<f64>>,
    pub pass: bool,
}

/// Accumulates residuals in plan order.
#[derive(Clone, Debug)]
pub struct ResidualStats {
    total: usize,
    ok: usize,
    excluded: usize,
    errors: usize,
    max_abs: f64,
    sum_abs: f64,
    max_scaled: f64,
    worst_point: Option<Vec<f64>>,
}

impl Default for ResidualStats {
    fn default() -> Self {
        ResidualStats::new()
    }
}

impl ResidualStats {
    pub fn new() -> Self {
        ResidualStats {
            total: 0,
            ok: 0,
            excluded: 0,
            errors: 0,
            max_abs: 0.0,
            sum_abs: 0.0,
            max_scaled: 0.0,
            worst_point: None,
        }
    }

    pub fn record(&mut self, point: &[f64], residual: f64, scale: f64) {
        self.total += 1;
        self.ok += 1;
        let abs = residual.abs();
        let scaled = abs / scale.max(1.0);
        self.max_abs = self.max_abs.max(abs);
        self.sum_abs += abs;
        if scaled > self.max_scaled || self.worst_point.is_none() {
            self.max_scaled = self.max_scaled.max(scaled);
            self.worst_point = Some(point.to_vec());
        }
    }

    pub fn record_status(&mut self, status: SampleStatus) {
        match status {
            SampleStatus::Ok => panic!("ok samples carry a residual; use record"),
            SampleStatus::ExcludedSingular => self.excluded += 1,
            SampleStatus::EvalError => self.errors += 1,
        }
        self.total += 1;
    }

    pub fn ok(&self) -> usize {
        self.ok
    }

    /// Merges statistics gathered over another slice of the plan.
    pub fn merge(&mut self, other: &ResidualStats) {
        self.total += other.total;
        self.ok += other.ok;
        self.excluded += other.excluded;
        self.errors += other.errors;
        self.max_abs = self.max_abs.max(other.max_abs);
        self.sum_abs += other.sum_abs;
        if other.max_scaled > self.max_scaled || self.worst_point.is_none() {
            self.max_scaled = self.max_scaled.max(other.max_scaled);
            self.worst_point = other.worst_point.clone().or(self.worst_point.take());
        }
    }

    pub fn summarize(&self, opts: &CheckOptions) -> CheckSummary {
        let regular_fraction = if self.total == 0 {
            0.0
        } else {
            self.ok as f64 / self.total as f64
        };
        CheckSummary {
            total: self.total,
            ok: self.ok,
            excluded: self.excluded,
            errors: self.errors,
            max_abs: self.max_abs,
            mean_abs: if self.ok == 0 { 0.0 } else { self.sum_abs / self.ok as f64 },
            max_scaled: self.max_scaled,
            tolerance: opts.tolerance,
            worst_point: self.worst_point.clone(),
            pass: self.ok > 0
                && self.max_scaled <= opts.tolerance
                && regular_fraction >= opts.min_regular_fraction,
        }
    }
}
