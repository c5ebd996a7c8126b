//! Polar coordinates in the tangent space at a surface point.
//!
//! Inside a face the tangent plane is the face plane. On an edge the two
//! incident faces are unfolded into the plane of the first. At a vertex the
//! tangent space is the cone formed by the fan of incident faces; raw angles
//! run from 0 to the total cone angle Θ, and angles reported to callers are
//! rescaled by 2π/Θ so they always live in (−π, π].

use std::f64::consts::PI;

use crate::mesh::{SurfaceMesh, SurfacePoint, Vec3};

/// Barycentric coordinates below this are treated as zero when classifying
/// where a point sits.
pub(crate) const ON_FEATURE_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct Wedge {
    pub face: usize,
    /// Unit vector from the vertex along the wedge's first (clockwise) edge.
    pub start: Vec3,
    pub angle: f64,
    pub cumulative: f64,
}

/// Faces around a vertex in counterclockwise order.
#[derive(Debug, Clone)]
pub(crate) struct Fan {
    pub wedges: Vec<Wedge>,
    pub closed: bool,
    pub total: f64,
}

impl Fan {
    pub fn build(mesh: &SurfaceMesh, v: usize) -> Option<Fan> {
        let first = *mesh.vertex_faces(v).first()?;
        // Walk clockwise to the boundary (or all the way round).
        let mut start_face = first;
        let mut closed = false;
        loop {
            let c = mesh.corner_of(start_face, v)?;
            // clockwise neighbor shares edge (v, next corner): local edge c
            match mesh.neighbor(start_face, c) {
                Some((g, _)) if g == first => {
                    closed = true;
                    break;
                }
                Some((g, _)) => start_face = g,
                None => break,
            }
            if start_face == first {
                closed = true;
                break;
            }
        }
        if closed {
            start_face = first;
        }
        let mut wedges = Vec::new();
        let mut f = start_face;
        let mut cumulative = 0.0;
        let limit = mesh.vertex_faces(v).len();
        loop {
            let c = mesh.corner_of(f, v)?;
            let face = mesh.faces()[f];
            let p = mesh.vertices()[v];
            let a = mesh.vertices()[face[(c + 1) % 3]] - p;
            let b = mesh.vertices()[face[(c + 2) % 3]] - p;
            let angle = a.angle(&b);
            wedges.push(Wedge {
                face: f,
                start: a.normalize(),
                angle,
                cumulative,
            });
            cumulative += angle;
            // counterclockwise neighbor shares edge (prev corner, v): local edge c+2
            match mesh.neighbor(f, (c + 2) % 3) {
                Some((g, _)) if g == start_face => break,
                Some((g, _)) => f = g,
                None => break,
            }
            if wedges.len() > limit {
                // non-manifold vertex (two fans touching); treat as open
                closed = false;
                break;
            }
        }
        Some(Fan {
            wedges,
            closed,
            total: cumulative,
        })
    }

    pub fn position(&self, face: usize) -> Option<usize> {
        self.wedges.iter().position(|w| w.face == face)
    }

    /// Raw fan angle of direction `dir` expressed in wedge `face`.
    pub fn angle_of(&self, mesh: &SurfaceMesh, face: usize, dir: &Vec3) -> f64 {
        let wi = self.position(face).unwrap_or(0);
        let w = &self.wedges[wi];
        let n = mesh.normal(w.face);
        let local = w.start.cross(dir).dot(&n).atan2(w.start.dot(dir));
        let mut phi = w.cumulative + local;
        if self.closed {
            phi = phi.rem_euclid(self.total);
        }
        phi
    }

    /// Face and unit direction at raw fan angle `phi`.
    pub fn direction_at(&self, mesh: &SurfaceMesh, phi: f64) -> Option<(usize, Vec3)> {
        let phi = if self.closed {
            phi.rem_euclid(self.total)
        } else {
            if phi < -1e-12 || phi > self.total + 1e-12 {
                return None;
            }
            phi.clamp(0.0, self.total)
        };
        let wi = self
            .wedges
            .iter()
            .position(|w| phi < w.cumulative + w.angle)
            .unwrap_or(self.wedges.len() - 1);
        let w = &self.wedges[wi];
        let local = (phi - w.cumulative).clamp(0.0, w.angle);
        let n = mesh.normal(w.face);
        let dir = w.start * local.cos() + n.cross(&w.start) * local.sin();
        Some((w.face, dir.normalize()))
    }

    /// Faces strictly between `from` and `to`, walking counterclockwise
    /// (`ccw = true`) or clockwise. `None` if the walk crosses a boundary.
    pub fn route(&self, from: usize, to: usize, ccw: bool) -> Option<Vec<usize>> {
        let n = self.wedges.len();
        let i = self.position(from)?;
        let j = self.position(to)?;
        let mut out = Vec::new();
        let mut k = i;
        loop {
            let next = if ccw {
                if k + 1 == n {
                    if !self.closed {
                        return None;
                    }
                    0
                } else {
                    k + 1
                }
            } else if k == 0 {
                if !self.closed {
                    return None;
                }
                n - 1
            } else {
                k - 1
            };
            if next == j {
                return Some(out);
            }
            out.push(self.wedges[next].face);
            k = next;
            if out.len() > n {
                return None;
            }
        }
    }

    pub fn route_angle(&self, faces: &[usize]) -> f64 {
        faces
            .iter()
            .filter_map(|&f| self.position(f))
            .map(|i| self.wedges[i].angle)
            .sum()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Location {
    Face(usize),
    Edge {
        face: usize,
        edge: usize,
        neighbor: Option<(usize, usize)>,
    },
    Vertex(Fan),
}

#[derive(Debug, Clone)]
pub(crate) struct TangentChart {
    pub location: Location,
    pub position: Vec3,
}

impl TangentChart {
    pub fn new(mesh: &SurfaceMesh, p: &SurfacePoint) -> TangentChart {
        let face = mesh.faces()[p.face];
        let nonzero: Vec<usize> = (0..3).filter(|&k| p.bary[k] > ON_FEATURE_EPS).collect();
        match nonzero.len() {
            1 => {
                let v = face[nonzero[0]];
                if let Some(fan) = Fan::build(mesh, v) {
                    return TangentChart {
                        position: mesh.vertices()[v],
                        location: Location::Vertex(fan),
                    };
                }
                TangentChart {
                    position: mesh.position(p),
                    location: Location::Face(p.face),
                }
            }
            2 => {
                let zero = (0..3).find(|k| !nonzero.contains(k)).unwrap_or(0);
                let edge = (zero + 1) % 3;
                let a = mesh.vertices()[face[edge]];
                let b = mesh.vertices()[face[(edge + 1) % 3]];
                let e = b - a;
                let x = mesh.position(p);
                let s = ((x - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                TangentChart {
                    position: a + e * s,
                    location: Location::Edge {
                        face: p.face,
                        edge,
                        neighbor: mesh.neighbor(p.face, edge),
                    },
                }
            }
            _ => TangentChart {
                position: mesh.position(p),
                location: Location::Face(p.face),
            },
        }
    }

    /// Cone angle of the tangent space.
    pub fn period(&self) -> f64 {
        match &self.location {
            Location::Vertex(fan) if fan.closed => fan.total,
            _ => 2.0 * PI,
        }
    }

    /// Scale from raw chart angles to reported angles.
    pub fn scale(&self) -> f64 {
        2.0 * PI / self.period()
    }

    fn edge_frame(mesh: &SurfaceMesh, face: usize, edge: usize) -> (Vec3, Vec3) {
        let [a, b, c] = mesh.face_positions(face);
        let pts = [a, b, c];
        let e = (pts[(edge + 1) % 3] - pts[edge]).normalize();
        let inward = mesh.normal(face).cross(&e);
        (e, inward)
    }

    /// Raw angle of a direction given in `face`'s plane.
    pub fn angle_of(&self, mesh: &SurfaceMesh, face: usize, dir: &Vec3) -> f64 {
        match &self.location {
            Location::Face(f) => {
                let [a, b, _] = mesh.face_positions(*f);
                let e = (b - a).normalize();
                let n = mesh.normal(*f);
                e.cross(dir).dot(&n).atan2(e.dot(dir))
            }
            Location::Edge {
                face: f,
                edge,
                neighbor,
            } => {
                let (e, inward) = Self::edge_frame(mesh, *f, *edge);
                let d = match neighbor {
                    Some((g, _)) if *g == face && face != *f => {
                        // unfold the neighbor's direction into f's plane
                        let in_g = mesh.normal(*g).cross(&(-e));
                        e * dir.dot(&e) - inward * dir.dot(&in_g)
                    }
                    _ => *dir,
                };
                d.dot(&inward).atan2(d.dot(&e))
            }
            Location::Vertex(fan) => fan.angle_of(mesh, face, dir),
        }
    }

    /// Face and unit direction at raw angle `phi`; `None` off a boundary.
    pub fn direction_at(&self, mesh: &SurfaceMesh, phi: f64) -> Option<(usize, Vec3)> {
        match &self.location {
            Location::Face(f) => {
                let [a, b, _] = mesh.face_positions(*f);
                let e = (b - a).normalize();
                let n = mesh.normal(*f);
                Some((*f, (e * phi.cos() + n.cross(&e) * phi.sin()).normalize()))
            }
            Location::Edge {
                face: f,
                edge,
                neighbor,
            } => {
                let (e, inward) = Self::edge_frame(mesh, *f, *edge);
                let phi = wrap_angle(phi);
                let (c, s) = (phi.cos(), phi.sin());
                if s >= 0.0 {
                    Some((*f, (e * c + inward * s).normalize()))
                } else {
                    let (g, _) = (*neighbor)?;
                    let in_g = mesh.normal(g).cross(&(-e));
                    Some((g, (e * c + in_g * (-s)).normalize()))
                }
            }
            Location::Vertex(fan) => fan.direction_at(mesh, phi),
        }
    }

    /// Signed angle from `reference` to `dir`, counterclockwise about the
    /// normal, rescaled to (−π, π].
    pub fn relative_angle(&self, phi_ref: f64, phi_dir: f64) -> f64 {
        let period = self.period();
        let raw = (phi_dir - phi_ref).rem_euclid(period);
        let raw = if raw > period / 2.0 { raw - period } else { raw };
        wrap_angle(raw * self.scale())
    }

    /// Inverse of [`relative_angle`](Self::relative_angle).
    pub fn absolute_angle(&self, phi_ref: f64, angle: f64) -> f64 {
        phi_ref + angle / self.scale()
    }

    /// The chart's base point expressed on `face`.
    pub fn point_on(&self, mesh: &SurfaceMesh, face: usize) -> SurfacePoint {
        mesh.locate_in_face(face, &self.position)
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}
