use super::rotation::{rotation_jacobian, rotation_matrix};
use super::{FitError, RigidPose};
use crate::body::{query_sdf, query_sdf_gradient, SdfGrid};
use crate::contact::CorrespondenceSet;
use crate::mesh::{SurfaceMesh, Vec3};

/// Body vertex indices and object-frame points of a correspondence set.
pub fn contact_pairs(
    body: &SurfaceMesh,
    object: &SurfaceMesh,
    s: &CorrespondenceSet,
) -> Result<(Vec<usize>, Vec<Vec3>), FitError> {
    if s.is_empty() {
        return Err(FitError::EmptyCorrespondences);
    }
    let mut verts = Vec::with_capacity(s.len());
    let mut pts = Vec::with_capacity(s.len());
    for c in &s.pairs {
        if c.body_vertex >= body.num_vertices() {
            return Err(FitError::InvalidInput(format!("body vertex {}", c.body_vertex)));
        }
        object
            .validate_point(&c.object_point)
            .map_err(|e| FitError::InvalidInput(e.to_string()))?;
        verts.push(c.body_vertex);
        pts.push(object.position(&c.object_point));
    }
    Ok((verts, pts))
}

/// Mean distance between body vertices and posed object points.
pub fn loss_contact(
    body: &SurfaceMesh,
    object: &SurfaceMesh,
    pose: &RigidPose,
    s: &CorrespondenceSet,
) -> Result<f64, FitError> {
    let (verts, pts) = contact_pairs(body, object, s)?;
    let targets: Vec<Vec3> = verts.iter().map(|&v| body.vertices()[v]).collect();
    Ok(contact_gradient(&targets, &pts, pose).0)
}

/// `(1/N) Σ‖v_i − (sRp_i + t)‖` and its gradient in `[r, t, s]`.
pub fn contact_gradient(body: &[Vec3], object: &[Vec3], pose: &RigidPose) -> (f64, [f64; 7]) {
    let r = rotation_matrix(&pose.rotation);
    let jr = rotation_jacobian(&pose.rotation);
    let n = body.len() as f64;
    let mut value = 0.0;
    let mut g = [0.0; 7];
    for (v, p) in body.iter().zip(object) {
        let rp = r * p;
        let q = rp * pose.scale + pose.translation;
        let d = q - v;
        let len = d.norm();
        value += len;
        if len == 0.0 {
            continue;
        }
        let u = d / len;
        for i in 0..3 {
            g[i] += u.dot(&(jr[i] * p)) * pose.scale;
            g[3 + i] += u[i];
        }
        g[6] += u.dot(&rp);
    }
    (value / n, g.map(|x| x / n))
}

/// `Σ −min(sdf(sRp + t), 0)` over posed vertices.
pub fn loss_penetration(sdf: &SdfGrid, object: &SurfaceMesh, pose: &RigidPose) -> f64 {
    object
        .vertices()
        .iter()
        .map(|p| -query_sdf(sdf, &pose.apply(p)).min(0.0))
        .sum()
}

/// [`loss_penetration`] over raw points with its gradient in `[r, t, s]`.
pub fn penetration_gradient(sdf: &SdfGrid, points: &[Vec3], pose: &RigidPose) -> (f64, [f64; 7]) {
    let r = rotation_matrix(&pose.rotation);
    let jr = rotation_jacobian(&pose.rotation);
    let mut value = 0.0;
    let mut g = [0.0; 7];
    for p in points {
        let rp = r * p;
        let q = rp * pose.scale + pose.translation;
        let (phi, grad) = query_sdf_gradient(sdf, &q);
        if phi >= 0.0 {
            continue;
        }
        value -= phi;
        for i in 0..3 {
            g[i] -= grad.dot(&(jr[i] * p)) * pose.scale;
            g[3 + i] -= grad[i];
        }
        g[6] -= grad.dot(&rp);
    }
    (value, g)
}
