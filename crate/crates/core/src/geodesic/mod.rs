//! Geodesics on triangle meshes: straightest tracing, shortest paths and the
//! log/exp maps built on top of them.
//!
//! Angles are measured counterclockwise around the face normal. At a mesh
//! vertex the cone of incident faces is rescaled to a full turn, so log and
//! exp stay mutually inverse there too.

mod chart;
mod graph;
mod shortest;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{MeshError, SurfaceMesh, SurfacePoint, Vec3};

pub use chart::wrap_angle;
pub use graph::{SteinerGraph, STEINER_PER_EDGE};
pub use shortest::shortest_path;
pub use trace::trace_straightest_geodesic;

pub(crate) use chart::TangentChart;
pub(crate) use graph::nearest_source;
pub(crate) use trace::project_to_face;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesicError {
    #[error("geodesic tracing stuck: {0}")]
    TracingStuck(&'static str),
    #[error("points lie on disconnected components")]
    Disconnected,
    #[error("direction has no component in the tangent plane")]
    DegenerateDirection,
    #[error("invalid geodesic length {0}")]
    InvalidLength(f64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// A unit direction in the tangent plane at a surface point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentDirection {
    pub base: SurfacePoint,
    pub direction: Vec3,
}

impl TangentDirection {
    /// Stores `direction` as given. Use [`TangentDirection::in_plane`] to
    /// project and normalize.
    pub fn new(base: SurfacePoint, direction: Vec3) -> Self {
        Self { base, direction }
    }

    /// Projects `direction` onto the base face plane and normalizes it.
    pub fn in_plane(mesh: &SurfaceMesh, base: SurfacePoint, direction: &Vec3) -> Result<Self, GeodesicError> {
        mesh.validate_point(&base)?;
        Ok(Self {
            base,
            direction: project_to_face(mesh, base.face, direction)?,
        })
    }
}

/// Polyline on the surface. Consecutive waypoints share a face; interior
/// waypoints sit on edges or vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    waypoints: Vec<SurfacePoint>,
    positions: Vec<Vec3>,
    /// Face containing segment `i` (from waypoint `i` to `i + 1`).
    segment_faces: Vec<usize>,
    cumulative: Vec<f64>,
}

impl GeodesicPath {
    pub(crate) fn single(mesh: &SurfaceMesh, p: SurfacePoint) -> Self {
        Self {
            waypoints: vec![p],
            positions: vec![mesh.position(&p)],
            segment_faces: vec![],
            cumulative: vec![0.0],
        }
    }

    pub(crate) fn from_parts(waypoints: Vec<SurfacePoint>, positions: Vec<Vec3>, segment_faces: Vec<usize>) -> Self {
        let mut cumulative = Vec::with_capacity(positions.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in positions.windows(2) {
            acc += (w[1] - w[0]).norm();
            cumulative.push(acc);
        }
        Self {
            waypoints,
            positions,
            segment_faces,
            cumulative,
        }
    }

    pub fn waypoints(&self) -> &[SurfacePoint] {
        &self.waypoints
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn segment_faces(&self) -> &[usize] {
        &self.segment_faces
    }

    /// Arclength at each waypoint.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn start(&self) -> SurfacePoint {
        self.waypoints[0]
    }

    pub fn end(&self) -> SurfacePoint {
        *self.waypoints.last().expect("path has a waypoint")
    }

    pub fn end_position(&self) -> Vec3 {
        *self.positions.last().expect("path has a waypoint")
    }

    fn segment_at(&self, t: f64) -> usize {
        let n = self.segment_faces.len();
        let i = self.cumulative.partition_point(|&c| c <= t);
        i.saturating_sub(1).min(n.saturating_sub(1))
    }

    /// Surface point at arclength `t`, clamped to the path.
    pub fn point_at(&self, mesh: &SurfaceMesh, t: f64) -> SurfacePoint {
        if self.segment_faces.is_empty() {
            return self.waypoints[0];
        }
        let t = t.clamp(0.0, self.length());
        let i = self.segment_at(t);
        let span = self.cumulative[i + 1] - self.cumulative[i];
        let s = if span > 0.0 {
            ((t - self.cumulative[i]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let x = self.positions[i] + (self.positions[i + 1] - self.positions[i]) * s;
        mesh.locate_in_face(self.segment_faces[i], &x)
    }

    /// 3D position at arclength `t`, clamped to the path.
    pub fn position_at(&self, t: f64) -> Vec3 {
        if self.segment_faces.is_empty() {
            return self.positions[0];
        }
        let t = t.clamp(0.0, self.length());
        let i = self.segment_at(t);
        let span = self.cumulative[i + 1] - self.cumulative[i];
        let s = if span > 0.0 {
            (t - self.cumulative[i]) / span
        } else {
            0.0
        };
        self.positions[i] + (self.positions[i + 1] - self.positions[i]) * s
    }

    /// Forward unit tangent at arclength `t`; `None` for a zero-length path.
    pub fn tangent_at(&self, mesh: &SurfaceMesh, t: f64) -> Option<TangentDirection> {
        if self.segment_faces.is_empty() {
            return None;
        }
        let i = self.segment_at(t.clamp(0.0, self.length()));
        let d = (self.positions[i + 1] - self.positions[i]).normalize();
        Some(TangentDirection {
            base: self.point_at(mesh, t),
            direction: d,
        })
    }

    /// Largest deviation from collinearity over edge-crossing waypoints,
    /// after unfolding the two faces around the crossed edge.
    pub fn straightness_defect(&self, mesh: &SurfaceMesh) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.segment_faces.len() {
            let (f, g) = (self.segment_faces[i - 1], self.segment_faces[i]);
            let a = self.positions[i - 1];
            let x = self.positions[i];
            let b = self.positions[i + 1];
            let d_in = (x - a).normalize();
            let d_out = (b - x).normalize();
            let unfolded = if f == g {
                d_out
            } else {
                let Some(k) = (0..3).find(|&k| mesh.neighbor(f, k).map(|(h, _)| h) == Some(g)) else {
                    continue; // vertex crossing between non-adjacent faces
                };
                let [p0, p1, p2] = mesh.face_positions(f);
                let pts = [p0, p1, p2];
                let e = (pts[(k + 1) % 3] - pts[k]).normalize();
                let out_f = e.cross(&mesh.normal(f));
                let in_g = mesh.normal(g).cross(&(-e));
                e * d_out.dot(&e) + out_f * d_out.dot(&in_g)
            };
            worst = worst.max(d_in.cross(&unfolded).norm());
        }
        worst
    }
}

/// Shortest geodesic between two surface points.
pub fn shortest_geodesic_path(
    mesh: &SurfaceMesh,
    a: &SurfacePoint,
    b: &SurfacePoint,
) -> Result<GeodesicPath, GeodesicError> {
    shortest_path(mesh, a, b)
}

/// Geodesic polar coordinates `(distance, angle)` of `target` around `base`,
/// with the angle measured from `base_tangent`.
pub fn log_map(
    mesh: &SurfaceMesh,
    base: &SurfacePoint,
    base_tangent: &TangentDirection,
    target: &SurfacePoint,
) -> Result<(f64, f64), GeodesicError> {
    let path = shortest_path(mesh, base, target)?;
    if path.segment_faces.is_empty() {
        return Ok((0.0, 0.0));
    }
    let chart = TangentChart::new(mesh, base);
    let phi_ref = chart.angle_of(mesh, base_tangent.base.face, &base_tangent.direction);
    let f0 = path.segment_faces[0];
    let d0 = (path.positions[1] - path.positions[0]).normalize();
    let phi = chart.angle_of(mesh, f0, &d0);
    Ok((path.length(), chart.relative_angle(phi_ref, phi)))
}

/// Inverse of [`log_map`]: rotates `base_tangent` by `angle` and traces a
/// straightest geodesic for `distance`.
pub fn exp_map(
    mesh: &SurfaceMesh,
    base: &SurfacePoint,
    base_tangent: &TangentDirection,
    distance: f64,
    angle: f64,
) -> Result<SurfacePoint, GeodesicError> {
    Ok(exp_map_path(mesh, base, base_tangent, distance, angle)?.end())
}

/// Like [`exp_map`] but returns the traced path.
pub fn exp_map_path(
    mesh: &SurfaceMesh,
    base: &SurfacePoint,
    base_tangent: &TangentDirection,
    distance: f64,
    angle: f64,
) -> Result<GeodesicPath, GeodesicError> {
    mesh.validate_point(base)?;
    if !(distance >= 0.0) || !distance.is_finite() {
        return Err(GeodesicError::InvalidLength(distance));
    }
    if distance == 0.0 {
        return Ok(GeodesicPath::single(mesh, *base));
    }
    let chart = TangentChart::new(mesh, base);
    let phi_ref = chart.angle_of(mesh, base_tangent.base.face, &base_tangent.direction);
    let (face, dir) = chart
        .direction_at(mesh, chart.absolute_angle(phi_ref, angle))
        .ok_or(GeodesicError::TracingStuck("direction leaves the mesh boundary"))?;
    let start = TangentDirection {
        base: chart.point_on(mesh, face),
        direction: dir,
    };
    trace_straightest_geodesic(mesh, &start, distance)
}

impl SurfaceMesh {
    /// Lazily built search graph for shortest paths.
    pub fn steiner_graph(&self) -> &SteinerGraph {
        self.steiner.get_or_init(|| SteinerGraph::build(self))
    }
}
