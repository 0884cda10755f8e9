//! Deterministic evaluation points: a tensor grid over a box plus seeded
//! quasi-random (rotated Halton) points, with optional singular-locus
//! exclusion predicates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::Expr;

/// Upper bound on the number of grid points in a default plan.
pub const DEFAULT_GRID_CAP: usize = 1000;
pub const DEFAULT_RANDOM_POINTS: usize = 100;
pub const DEFAULT_SEED: u64 = 20_240_601;

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

#[derive(Clone, Debug)]
pub struct SamplePlan {
    pub bounds: Vec<(f64, f64)>,
    /// Grid points per axis; empty means the default `10^n` grid clipped to
    /// [`DEFAULT_GRID_CAP`] points.
    pub grid: Vec<usize>,
    pub random_points: usize,
    pub seed: u64,
    /// A point is excluded when any of these evaluates within
    /// `exclusion_tolerance` of zero (or fails to evaluate).
    pub exclusions: Vec<Expr>,
    pub exclusion_tolerance: f64,
}

impl SamplePlan {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        SamplePlan {
            bounds,
            grid: Vec::new(),
            random_points: DEFAULT_RANDOM_POINTS,
            seed: DEFAULT_SEED,
            exclusions: Vec::new(),
            exclusion_tolerance: 1e-8,
        }
    }

    pub fn with_grid(mut self, per_axis: usize) -> Self {
        self.grid = vec![per_axis; self.bounds.len()];
        self
    }

    pub fn with_random_points(mut self, count: usize) -> Self {
        self.random_points = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_exclusion(mut self, predicate: Expr) -> Self {
        self.exclusions.push(predicate);
        self
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    fn grid_counts(&self) -> Vec<usize> {
        let n = self.dimension();
        if !self.grid.is_empty() {
            return self.grid.clone();
        }
        if n == 0 {
            return Vec::new();
        }
        let mut k = 10usize;
        while k > 1 && k.pow(n as u32) > DEFAULT_GRID_CAP {
            k -= 1;
        }
        vec![k; n]
    }

    /// All plan points in plan order: grid first (last axis fastest), then
    /// the quasi-random points.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let n = self.dimension();
        let counts = self.grid_counts();
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total + self.random_points);
        if n > 0 && total > 0 {
            let mut idx = vec![0usize; n];
            for _ in 0..total {
                out.push(
                    (0..n)
                        .map(|a| {
                            let (lo, hi) = self.bounds[a];
                            if counts[a] == 1 {
                                0.5 * (lo + hi)
                            } else {
                                lo + (hi - lo) * idx[a] as f64 / (counts[a] - 1) as f64
                            }
                        })
                        .collect(),
                );
                for a in (0..n).rev() {
                    idx[a] += 1;
                    if idx[a] < counts[a] {
                        break;
                    }
                    idx[a] = 0;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let shift: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        for i in 1..=self.random_points {
            out.push(
                (0..n)
                    .map(|a| {
                        let base = PRIMES[a % PRIMES.len()];
                        let u = (radical_inverse(i as u64, base) + shift[a]).fract();
                        let (lo, hi) = self.bounds[a];
                        lo + (hi - lo) * u
                    })
                    .collect(),
            );
        }
        out
    }

    pub fn is_excluded(&self, point: &[f64]) -> bool {
        self.exclusions.iter().any(|e| match e.eval_at(point) {
            Ok(v) => v.abs() <= self.exclusion_tolerance,
            Err(_) => true,
        })
    }
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * inv;
        i /= b;
        inv /= base as f64;
    }
    out
}
