//! Metrics, Christoffel symbols and geodesics in coordinate frames.

mod connection;
mod geodesic;
mod metric;

use thiserror::Error;

use crate::expr::EvalError;

pub use connection::{
    christoffel_from_metric, christoffel_numeric, constant_curvature_connection,
    hypersurface_connection, ChristoffelTable, Connection, HypersurfaceDenominator,
    SYMBOLIC_INVERSE_MAX_DIM,
};
pub use geodesic::{integrate_geodesic, self_convergence_order, GeodesicPath};
pub use metric::{conformal_factor, Metric};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("matrix is not square")]
    NotSquare,
    #[error("metric is not symmetric in entries ({i},{j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Vec<f64> },
    #[error("metric is not positive definite at {point:?} (leading minor of order {order} is {minor})")]
    NotPositiveDefinite {
        point: Vec<f64>,
        order: usize,
        minor: f64,
    },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("{0}")]
    InvalidArgument(String),
}
