//! Contact-guided registration of a human body mesh and an object mesh.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod body;
pub mod contact;
pub mod eval;
pub mod fit;
pub mod geodesic;
pub mod io;
pub mod mesh;
pub mod retrieval;
pub mod synth;

pub use mesh::{SurfaceMesh, SurfacePoint, Vec3};
