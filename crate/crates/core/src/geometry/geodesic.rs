use super::{Connection, GeometryError};

/// Sampled solution of the geodesic equation.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub step: f64,
    /// Set when connection evaluation failed mid-path; the path stops at the
    /// last successfully completed step.
    pub truncated: Option<GeometryError>,
}

impl GeodesicPath {
    pub fn endpoint(&self) -> &[f64] {
        self.points.last().expect("path holds the initial point")
    }
}

/// Acceleration `a^k = −Σ Γ_ij^k v^i v^j`.
fn acceleration(conn: &Connection, x: &[f64], v: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let n = conn.dimension();
    let table = conn.eval(x)?;
    Ok((0..n)
        .map(|k| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc -= table.get(i, j, k) * v[i] * v[j];
                }
            }
            acc
        })
        .collect())
}

fn axpy(base: &[f64], scale: f64, dir: &[f64]) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + scale * d).collect()
}

/// Fixed-step classical RK4 for `x'' + Γ(x)(x', x') = 0` on `[0, duration]`.
pub fn integrate_geodesic(
    conn: &Connection,
    x0: &[f64],
    v0: &[f64],
    duration: f64,
    steps: usize,
) -> Result<GeodesicPath, GeometryError> {
    let n = conn.dimension();
    if steps == 0 {
        return Err(GeometryError::InvalidArgument("steps must be at least 1".into()));
    }
    if x0.len() != n || v0.len() != n {
        return Err(GeometryError::InvalidArgument(format!(
            "initial data must have {n} components"
        )));
    }
    let h = duration / steps as f64;
    let mut path = GeodesicPath {
        points: vec![x0.to_vec()],
        velocities: vec![v0.to_vec()],
        step: h,
        truncated: None,
    };
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    for _ in 0..steps {
        let stage = || -> Result<(Vec<f64>, Vec<f64>), GeometryError> {
            let k1x = v.clone();
            let k1v = acceleration(conn, &x, &v)?;
            let x2 = axpy(&x, h / 2.0, &k1x);
            let k2x = axpy(&v, h / 2.0, &k1v);
            let k2v = acceleration(conn, &x2, &k2x)?;
            let x3 = axpy(&x, h / 2.0, &k2x);
            let k3x = axpy(&v, h / 2.0, &k2v);
            let k3v = acceleration(conn, &x3, &k3x)?;
            let x4 = axpy(&x, h, &k3x);
            let k4x = axpy(&v, h, &k3v);
            let k4v = acceleration(conn, &x4, &k4x)?;
            let combine = |base: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
                (0..n)
                    .map(|i| base[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
                    .collect()
            };
            Ok((
                combine(&x, &k1x, &k2x, &k3x, &k4x),
                combine(&v, &k1v, &k2v, &k3v, &k4v),
            ))
        };
        match stage() {
            Ok((nx, nv)) => {
                x = nx;
                v = nv;
                path.points.push(x.clone());
                path.velocities.push(v.clone());
            }
            Err(e) => {
                path.truncated = Some(e);
                break;
            }
        }
    }
    Ok(path)
}

/// Observed order of convergence from endpoints at `steps`, `2·steps` and
/// `4·steps`: `log2(|e_N − e_2N| / |e_2N − e_4N|)`.
pub fn self_convergence_order(
    conn: &Connection,
    x0: &[f64],
    v0: &[f64],
    duration: f64,
    steps: usize,
) -> Result<f64, GeometryError> {
    let ends: Vec<Vec<f64>> = [steps, 2 * steps, 4 * steps]
        .iter()
        .map(|&s| {
            let path = integrate_geodesic(conn, x0, v0, duration, s)?;
            match path.truncated {
                Some(e) => Err(e),
                None => Ok(path.endpoint().to_vec()),
            }
        })
        .collect::<Result<_, _>>()?;
    let dist = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    Ok((dist(&ends[0], &ends[1]) / dist(&ends[1], &ends[2])).log2())
}
