//! Splitting maps built from distance functions on almost-Euclidean spaces.
//!
//! The crate constructs maps `psi = (rho_1 - rho_1(p), ..., rho_k - rho_k(p))`
//! from distances to well-chosen far points, measures how close they are to
//! isometries, and compares them with their harmonic replacements. Backends
//! are analytic (Euclidean space, flat cones, sphere caps) or sampled graphs.

pub mod error;
pub mod fields;
pub mod direction;
pub mod gougu;
pub mod manifold;
pub mod mesh;
pub mod par;
pub mod poisson;
pub mod point;
pub mod quad;
pub mod rng;
pub mod sparse;
pub mod splitting;
pub mod spatial;

pub use error::{Error, Result};
pub use manifold::{Manifold, ManifoldKind, ManifoldSpec};
pub use point::{Coords, Point};
