//! Contact patches, their geodesic axes, and two-click transfer between
//! meshes.
//!
//! A patch is parameterized by its axis: every vertex gets the arclength `t`
//! of its closest axis point plus log-map polar coordinates `(d, α)` around
//! that point. Re-tracing the same axis on another mesh and applying the exp
//! map at each `(t, d, α)` reproduces the patch there, one target point per
//! source vertex.

mod axis;
mod param;
mod transfer;

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesic::GeodesicError;
use crate::mesh::SurfaceMesh;

pub use axis::{synthesize_axis, unpack_axis, ContactAxis};
pub use param::{parameterize_patch, ParamPatch, ParamRecord};
pub use transfer::{transfer_patch, Correspondence, CorrespondenceSet, Transfer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("patch {0} is degenerate: {1}")]
    DegeneratePatch(usize, &'static str),
    #[error("click direction has no component in the start face plane")]
    DegenerateDirection,
    #[error("vertex {index} out of range for a mesh with {count} vertices")]
    VertexOutOfRange { index: usize, count: usize },
    #[error("target axis length {target} differs from source length {expected}")]
    AxisLengthMismatch { expected: f64, target: f64 },
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
}

/// An edge-connected set of contact vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactPatch {
    pub id: usize,
    /// Member vertex indices, ascending.
    pub vertices: Vec<usize>,
}

/// Splits `contacts` into edge-connected components, ordered by smallest
/// member. Patch ids are positions in that order.
pub fn extract_patches(mesh: &SurfaceMesh, contacts: &BTreeSet<usize>) -> Result<Vec<ContactPatch>, ContactError> {
    if let Some(&v) = contacts.iter().next_back() {
        if v >= mesh.num_vertices() {
            return Err(ContactError::VertexOutOfRange {
                index: v,
                count: mesh.num_vertices(),
            });
        }
    }
    let mut seen = BTreeSet::new();
    let mut patches = Vec::new();
    for &seed in contacts {
        if !seen.insert(seed) {
            continue;
        }
        let mut members = vec![seed];
        let mut queue = VecDeque::from([seed]);
        while let Some(v) = queue.pop_front() {
            for w in mesh.vertex_neighbors(v) {
                if contacts.contains(&w) && seen.insert(w) {
                    members.push(w);
                    queue.push_back(w);
                }
            }
        }
        members.sort_unstable();
        patches.push(ContactPatch {
            id: patches.len(),
            vertices: members,
        });
    }
    Ok(patches)
}

/// Maps contact vertices of `source` to their nearest vertices on an
/// aligned `target`.
pub fn project_contacts(
    source: &SurfaceMesh,
    target: &SurfaceMesh,
    contacts: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>, ContactError> {
    contacts
        .iter()
        .map(|&v| {
            let p = source.vertices().get(v).ok_or(ContactError::VertexOutOfRange {
                index: v,
                count: source.num_vertices(),
            })?;
            Ok(target.nearest_vertex(p))
        })
        .collect()
}
