use nalgebra::DMatrix;

use super::GeometryError;
use crate::expr::Expr;

/// Symmetric matrix of metric coefficients `g_ij` as expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    entries: Vec<Vec<Expr>>,
}

impl Metric {
    /// Builds a metric from a square matrix that must be structurally symmetric.
    pub fn new(entries: Vec<Vec<Expr>>) -> Result<Self, GeometryError> {
        let n = entries.len();
        if entries.iter().any(|row| row.len() != n) {
            return Err(GeometryError::NotSquare);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i][j] != entries[j][i] {
                    return Err(GeometryError::NotSymmetric { i: i + 1, j: j + 1 });
                }
            }
        }
        Ok(Metric { entries })
    }

    pub fn flat(n: usize) -> Self {
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { Expr::one() } else { Expr::zero() })
                    .collect()
            })
            .collect();
        Metric { entries }
    }

    /// `g = (dx_1² + … + dx_n²) / (1 + κ(x_1² + … + x_n²))²`.
    pub fn constant_curvature(kappa: f64, n: usize) -> Self {
        let b = conformal_factor(kappa, n);
        let diag = b.powi(2);
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { diag.clone() } else { Expr::zero() })
                    .collect()
            })
            .collect();
        Metric { entries }
    }

    /// Metric induced on the graph `x_{m+1} = u(x_1..x_m)`:
    /// `g_ij = δ_ij + u_i u_j`.
    pub fn hypersurface(u: &Expr, m: usize) -> Self {
        let grad = u.gradient(m);
        let entries = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let prod = &grad[i] * &grad[j];
                        if i == j {
                            Expr::one() + prod
                        } else {
                            prod
                        }
                    })
                    .collect()
            })
            .collect();
        Metric { entries }
    }

    pub fn dimension(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i][j]
    }

    pub fn entries(&self) -> &[Vec<Expr>] {
        &self.entries
    }

    pub fn eval(&self, point: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let n = self.dimension();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.entries[i][j].eval_at(point)?;
            }
        }
        Ok(m)
    }

    /// Leading principal minors must all be positive at `point`.
    pub fn check_positive_definite(&self, point: &[f64]) -> Result<(), GeometryError> {
        let g = self.eval(point)?;
        for k in 1..=self.dimension() {
            let minor = g.view((0, 0), (k, k)).determinant();
            if !(minor > 0.0) {
                return Err(GeometryError::NotPositiveDefinite {
                    point: point.to_vec(),
                    order: k,
                    minor,
                });
            }
        }
        Ok(())
    }
}

/// `b = 1 / (1 + κ Σ x_k²)`.
pub fn conformal_factor(kappa: f64, n: usize) -> Expr {
    let r2 = (0..n).fold(Expr::zero(), |acc, k| acc + Expr::var(k).powi(2));
    Expr::one() / (Expr::one() + Expr::float(kappa) * r2)
}
