//! Cooper–Rivin scalar curvature on triangulated 3-manifolds with sphere
//! packing metrics, the discrete dual-Laplacians that form its Jacobian, and
//! the combinatorial curvature flows built on top of them.
//!
//! The crate is organized bottom-up:
//!
//! - [`complex`]: the abstract tetrahedral complex and its incidence data.
//! - [`euclid`] and [`hyperbolic`]: per-tetrahedron geometry of conformal
//!   tetrahedra (realizability, solid angles, the edge-tangent sphere).
//! - [`curvature`]: packing metrics, per-vertex curvature and the scalar
//!   energies assembled over the whole complex.
//! - [`operators`]: the Jacobian/Laplacian family and spectral utilities.
//! - [`flows`]: adaptive integration of the curvature flows, DQE finding and
//!   prescribed-curvature solving.
//!
//! ```
//! use dqeflow::{complex::Builtin, curvature::{cr_curvature, Geometry, PackingMetric}};
//!
//! let tri = Builtin::Pentachoron.build();
//! let metric = PackingMetric::uniform(Geometry::Euclidean, tri.vertex_count(), 1.0);
//! let state = cr_curvature(&tri, &metric).unwrap();
//! let expected = 8.0 * std::f64::consts::PI - 12.0 * (1.0f64 / 3.0).acos();
//! assert!((state.k[0] - expected).abs() < 1e-12);
//! ```

// `!(x > y)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complex;
pub mod curvature;
mod error;
pub mod euclid;
pub mod fd;
pub mod flows;
pub mod hyperbolic;
pub mod linalg;
pub mod operators;
mod spherical;

pub use error::{Degeneracy, Error, Result};
