use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{ContactError, ContactPatch};
use crate::geodesic::{
    shortest_geodesic_path, trace_straightest_geodesic, GeodesicError, GeodesicPath, TangentDirection,
};
use crate::mesh::{SurfaceMesh, SurfacePoint, Vec3};

/// A geodesic contact axis: the path, its start tangent and its arclength
/// table (one entry per waypoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactAxis {
    pub path: GeodesicPath,
    pub start: TangentDirection,
}

impl ContactAxis {
    pub fn from_path(mesh: &SurfaceMesh, path: GeodesicPath) -> Result<Self, ContactError> {
        let start = path
            .tangent_at(mesh, 0.0)
            .ok_or(ContactError::DegeneratePatch(0, "zero-length axis"))?;
        Ok(Self { path, start })
    }

    pub fn length(&self) -> f64 {
        self.path.length()
    }

    pub fn table(&self) -> &[f64] {
        self.path.cumulative()
    }

    pub fn point_at(&self, mesh: &SurfaceMesh, t: f64) -> SurfacePoint {
        self.path.point_at(mesh, t)
    }

    /// Unit tangent at arclength `t`.
    pub fn tangent_at(&self, mesh: &SurfaceMesh, t: f64) -> TangentDirection {
        self.path.tangent_at(mesh, t).unwrap_or(self.start)
    }
}

/// First principal axis of the patch, projected onto the surface and joined
/// by a shortest geodesic.
pub fn synthesize_axis(mesh: &SurfaceMesh, patch: &ContactPatch) -> Result<ContactAxis, ContactError> {
    if patch.vertices.len() < 2 {
        return Err(ContactError::DegeneratePatch(patch.id, "fewer than two vertices"));
    }
    let mut pts = Vec::with_capacity(patch.vertices.len());
    for &v in &patch.vertices {
        pts.push(*mesh.vertices().get(v).ok_or(ContactError::VertexOutOfRange {
            index: v,
            count: mesh.num_vertices(),
        })?);
    }
    let mean = pts.iter().sum::<Vec3>() / pts.len() as f64;
    if pts.iter().all(|p| (p - mean).norm() < 1e-9) {
        return Err(ContactError::DegeneratePatch(patch.id, "all vertices coincide"));
    }
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= pts.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let mut axis: Vec3 = eig.eigenvectors.column(k).into();
    // vertices are ascending, so pts[0] is the smallest-index vertex
    if (pts[0] - mean).dot(&axis) > 0.0 {
        axis = -axis;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        let s = (p - mean).dot(&axis);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    let a = mesh.closest_point(&(mean + axis * lo)).0;
    let b = mesh.closest_point(&(mean + axis * hi)).0;
    let path = shortest_geodesic_path(mesh, &a, &b)?;
    if path.length() <= 1e-12 {
        return Err(ContactError::DegeneratePatch(patch.id, "axis endpoints coincide"));
    }
    ContactAxis::from_path(mesh, path)
}

/// Re-traces `source` on `target` from a start point and a second click
/// giving the direction.
pub fn unpack_axis(
    target: &SurfaceMesh,
    source: &ContactAxis,
    start: &SurfacePoint,
    click_direction: &Vec3,
) -> Result<ContactAxis, ContactError> {
    target.validate_point(start).map_err(GeodesicError::from)?;
    let d = click_direction - target.position(start);
    let n = target.normal(start.face);
    let projected = d - n * d.dot(&n);
    if !(projected.norm() >= 1e-9) {
        return Err(ContactError::DegenerateDirection);
    }
    let dir = projected.normalize();
    let tangent = TangentDirection::new(*start, dir);
    let path = trace_straightest_geodesic(target, &tangent, source.length())?;
    Ok(ContactAxis { path, start: tangent })
}
