//! Numerical laboratory for the geodesic flow on negatively curved surfaces.
//!
//! The crate computes closed-geodesic length spectra, linearized Poincare
//! maps, dynamical zeta functions, and entropy/pressure estimates for a small
//! family of surface models: the hyperbolic half-plane, hyperbolic cylinders,
//! Schottky quotients, and compactly supported conformal perturbations of the
//! first two. Constant-curvature models double as exact oracles: every
//! numerically found orbit can be checked against a closed-form translation
//! length.
//!
//! Module map:
//! - [`geometry`]: metric models, curvature, geodesic and Jacobi flow, Sasaki
//!   distances on the unit tangent bundle.
//! - [`schottky`]: free-group word enumeration and exact lengths from Mobius
//!   generator matrices.
//! - [`orbits`]: Birkhoff curve shortening plus multiple-shooting Newton
//!   refinement of closed geodesics and their monodromies.
//! - [`spectrum`]: the deduplicated length spectrum with counting functions
//!   and CSV persistence.
//! - [`analysis`]: zeta functions, entropy/pressure estimators, trace-formula
//!   pairings, orbit separation checks.
//! - [`config`] / [`pipeline`]: reproducible run configuration and the
//!   enumerate/analyze drivers behind the CLI.

pub mod analysis;
pub mod config;
pub mod error;
pub mod geometry;
pub mod numeric;
pub mod orbits;
pub mod pipeline;
pub mod schottky;
pub mod spectrum;

pub use error::{Error, Result};
