//! Verification and construction toolkit for geodesic webs of hypersurfaces.
//!
//! * [`expr`]: expression language with exact symbolic differentiation and
//!   polynomial normalization.
//! * [`geometry`]: metrics, Christoffel symbols and a geodesic integrator.
//! * [`webcheck`]: flex operator and the geodesic residual systems.
//! * [`euler`]: hyperplanar web functions built from implicit Euler-type
//!   solutions.
//! * [`envelope`]: level-set plane families and their envelopes.

pub mod expr;
pub mod geometry;
pub mod field;
pub mod report;
pub mod sampling;
pub mod webcheck;
pub mod euler;
pub mod envelope;
