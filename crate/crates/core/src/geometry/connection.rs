use nalgebra::DMatrix;

use super::{GeometryError, Metric};
use crate::expr::Expr;

/// Numeric values `Γ_ij^k` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelTable {
    n: usize,
    data: Vec<f64>,
}

impl ChristoffelTable {
    pub fn zeros(n: usize) -> Self {
        ChristoffelTable {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// `Γ_ij^k` (0-based indices).
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(k * self.n + i) * self.n + j] = v;
    }

    /// Largest componentwise absolute difference.
    pub fn max_abs_diff(&self, other: &ChristoffelTable) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Which denominator the closed-form hypersurface connection uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HypersurfaceDenominator {
    /// `1 + Σ u_k²`, obtained by inverting the induced metric.
    #[default]
    Derived,
    /// `1 + Σ (1 + u_k²)`, as typeset in the source derivation. Kept only to
    /// document that it disagrees with the generic computation.
    AsPrinted,
}

#[derive(Clone, Debug)]
enum Repr {
    /// `symbols[(k * n + i) * n + j] = Γ_ij^k`.
    Symbolic {
        symbols: Vec<Expr>,
        determinant: Option<Expr>,
    },
    /// Levi-Civita connection evaluated by numeric inversion of the metric.
    Numeric {
        metric: Metric,
        derivatives: Vec<Vec<Vec<Expr>>>,
    },
}

/// Connection coefficients `Γ_ij^k` in a coordinate frame.
#[derive(Clone, Debug)]
pub struct Connection {
    n: usize,
    repr: Repr,
    torsion_free: bool,
}

fn flat_index(n: usize, i: usize, j: usize, k: usize) -> usize {
    (k * n + i) * n + j
}

impl Connection {
    /// Connection with user-supplied symbols, `table[k][i][j] = Γ_ij^k`.
    /// Torsion-freeness is decided structurally; use
    /// [`Connection::verify_torsion_free`] for a sampled check.
    pub fn from_table(table: Vec<Vec<Vec<Expr>>>) -> Result<Self, GeometryError> {
        let n = table.len();
        if table.iter().any(|m| m.len() != n || m.iter().any(|r| r.len() != n)) {
            return Err(GeometryError::NotSquare);
        }
        let symbols: Vec<Expr> = table.into_iter().flatten().flatten().collect();
        let torsion_free = (0..n).all(|k| {
            (0..n).all(|i| {
                (0..n).all(|j| symbols[flat_index(n, i, j, k)] == symbols[flat_index(n, j, i, k)])
            })
        });
        Ok(Connection {
            n,
            repr: Repr::Symbolic {
                symbols,
                determinant: None,
            },
            torsion_free,
        })
    }

    fn symmetric(n: usize, mut entry: impl FnMut(usize, usize, usize) -> Expr) -> Self {
        let mut symbols = vec![Expr::zero(); n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let e = entry(i, j, k);
                    symbols[flat_index(n, j, i, k)] = e.clone();
                    symbols[flat_index(n, i, j, k)] = e;
                }
            }
        }
        Connection {
            n,
            repr: Repr::Symbolic {
                symbols,
                determinant: None,
            },
            torsion_free: true,
        }
    }

    pub fn flat(n: usize) -> Self {
        Connection::symmetric(n, |_, _, _| Expr::zero())
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn is_torsion_free(&self) -> bool {
        self.torsion_free
    }

    /// Symbolic `Γ_ij^k`, when the connection is held in closed form.
    pub fn symbol(&self, i: usize, j: usize, k: usize) -> Option<&Expr> {
        match &self.repr {
            Repr::Symbolic { symbols, .. } => Some(&symbols[flat_index(self.n, i, j, k)]),
            Repr::Numeric { .. } => None,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.repr, Repr::Symbolic { .. })
    }

    pub fn eval(&self, point: &[f64]) -> Result<ChristoffelTable, GeometryError> {
        let n = self.n;
        let mut table = ChristoffelTable::zeros(n);
        match &self.repr {
            Repr::Symbolic {
                symbols,
                determinant,
            } => {
                if let Some(det) = determinant {
                    if det.eval_at(point)? == 0.0 {
                        return Err(GeometryError::SingularMetric {
                            point: point.to_vec(),
                        });
                    }
                }
                for (slot, e) in table.data.iter_mut().zip(symbols) {
                    if !e.is_zero() {
                        *slot = e.eval_at(point)?;
                    }
                }
            }
            Repr::Numeric {
                metric,
                derivatives,
            } => {
                let g = metric.eval(point)?;
                let inv = g.try_inverse().ok_or_else(|| GeometryError::SingularMetric {
                    point: point.to_vec(),
                })?;
                // dg[l][i][j] = ∂_l g_ij
                let mut dg = vec![DMatrix::<f64>::zeros(n, n); n];
                for (l, dl) in derivatives.iter().enumerate() {
                    for i in 0..n {
                        for j in 0..n {
                            dg[l][(i, j)] = dl[i][j].eval_at(point)?;
                        }
                    }
                }
                for k in 0..n {
                    for i in 0..n {
                        for j in i..n {
                            let v: f64 = (0..n)
                                .map(|l| {
                                    inv[(k, l)]
                                        * (dg[j][(l, i)] + dg[i][(l, j)] - dg[l][(i, j)])
                                })
                                .sum::<f64>()
                                * 0.5;
                            table.set(i, j, k, v);
                            table.set(j, i, k, v);
                        }
                    }
                }
            }
        }
        Ok(table)
    }

    /// Sampled check of `Γ_ij^k = Γ_ji^k`; returns the largest asymmetry.
    pub fn verify_torsion_free(&self, points: &[Vec<f64>]) -> Result<f64, GeometryError> {
        let n = self.n;
        let mut worst = 0.0f64;
        for p in points {
            let t = self.eval(p)?;
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max((t.get(i, j, k) - t.get(j, i, k)).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Largest dimension for which the metric is inverted symbolically.
pub const SYMBOLIC_INVERSE_MAX_DIM: usize = 4;

fn determinant(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        n => (0..n).fold(Expr::zero(), |acc, j| {
            if m[0][j].is_zero() {
                return acc;
            }
            let term = &m[0][j] * &determinant(&minor(m, 0, j));
            if j % 2 == 0 {
                acc + term
            } else {
                acc - term
            }
        }),
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

/// Levi-Civita connection of `g` from
/// `Γ_ij^k = ½ g^{kl} (∂_j g_li + ∂_i g_lj − ∂_l g_ij)`.
///
/// The inverse metric is formed symbolically (adjugate over determinant) up
/// to [`SYMBOLIC_INVERSE_MAX_DIM`]; larger metrics are inverted numerically at
/// each evaluation point.
pub fn christoffel_from_metric(g: &Metric) -> Connection {
    let n = g.dimension();
    if n > SYMBOLIC_INVERSE_MAX_DIM {
        return christoffel_numeric(g);
    }
    let entries = g.entries();
    // dg[l][i][j] = ∂_l g_ij
    let dg: Vec<Vec<Vec<Expr>>> = (0..n)
        .map(|l| {
            entries
                .iter()
                .map(|row| row.iter().map(|e| e.diff_x(l)).collect())
                .collect()
        })
        .collect();
    let det = determinant(entries);
    let all_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || entries[i][j].is_zero()));
    // inv[k][l] = g^{kl}
    let inv: Vec<Vec<Expr>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|l| {
                    if all_diagonal {
                        return if k == l {
                            Expr::one() / &entries[k][k]
                        } else {
                            Expr::zero()
                        };
                    }
                    let cofactor = determinant(&minor(entries, l, k));
                    let signed = if (k + l) % 2 == 0 { cofactor } else { -cofactor };
                    signed / &det
                })
                .collect()
        })
        .collect();
    let mut conn = Connection::symmetric(n, |i, j, k| {
        let sum = (0..n).fold(Expr::zero(), |acc, l| {
            if inv[k][l].is_zero() {
                return acc;
            }
            let bracket = &dg[j][l][i] + &dg[i][l][j] - &dg[l][i][j];
            if bracket.is_zero() {
                return acc;
            }
            acc + &inv[k][l] * &bracket
        });
        Expr::ratio(1, 2) * sum
    });
    conn.repr = match conn.repr {
        Repr::Symbolic { symbols, .. } => Repr::Symbolic {
            symbols,
            determinant: Some(det),
        },
        other => other,
    };
    conn
}

/// Levi-Civita connection evaluated by numeric inversion at each point.
pub fn christoffel_numeric(g: &Metric) -> Connection {
    let n = g.dimension();
    let derivatives = (0..n)
        .map(|l| {
            g.entries()
                .iter()
                .map(|row| row.iter().map(|e| e.diff_x(l)).collect())
                .collect()
        })
        .collect();
    Connection {
        n,
        repr: Repr::Numeric {
            metric: g.clone(),
            derivatives,
        },
        torsion_free: true,
    }
}

/// Closed-form Levi-Civita connection of the constant-curvature metric:
/// with `b = 1/(1 + κ Σ x²)`,
/// `Γ_ii^k = 2κ x_k b` (k ≠ i), `Γ_ii^i = −2κ x_i b`, `Γ_ij^i = −2κ x_j b`
/// (i ≠ j), and `Γ_ij^k = 0` for distinct i, j, k.
pub fn constant_curvature_connection(kappa: f64, n: usize) -> Connection {
    if kappa == 0.0 {
        return Connection::flat(n);
    }
    let b = super::metric::conformal_factor(kappa, n);
    let two_kappa_b = Expr::float(2.0 * kappa) * b;
    let term = |m: usize| &two_kappa_b * &Expr::var(m);
    Connection::symmetric(n, |i, j, k| {
        if i == j {
            if k == i {
                -term(i)
            } else {
                term(k)
            }
        } else if k == i {
            -term(j)
        } else if k == j {
            -term(i)
        } else {
            Expr::zero()
        }
    })
}

/// Closed-form connection of the graph hypersurface `x_{m+1} = u(x_1..x_m)`:
/// `Γ_ij^k = u_k u_ij / W` with `W` chosen by `denominator`.
pub fn hypersurface_connection(
    u: &Expr,
    m: usize,
    denominator: HypersurfaceDenominator,
) -> Connection {
    let grad = u.gradient(m);
    let hess = u.hessian(m);
    let sum_sq = grad.iter().fold(Expr::zero(), |acc, g| acc + g.powi(2));
    let w = match denominator {
        HypersurfaceDenominator::Derived => Expr::one() + sum_sq,
        HypersurfaceDenominator::AsPrinted => Expr::int(1 + m as i64) + sum_sq,
    };
    Connection::symmetric(m, |i, j, k| &grad[k] * &hess[i][j] / &w)
}
