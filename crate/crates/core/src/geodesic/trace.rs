use super::chart::{Fan, TangentChart};
use super::{GeodesicError, GeodesicPath, TangentDirection};
use crate::mesh::{SurfaceMesh, SurfacePoint, Vec3};

/// Crossings closer than this to a mesh vertex are snapped onto it.
const VERTEX_SNAP: f64 = 1e-9;
const MAX_STEPS: usize = 1_000_000;

/// Traces the straightest geodesic of arclength `length` from `start`.
///
/// Inside a face the path is a straight line. At an edge the two faces are
/// unfolded and the line continues. At a vertex the outgoing direction
/// leaves exactly half of the cone angle on either side.
pub fn trace_straightest_geodesic(
    mesh: &SurfaceMesh,
    start: &TangentDirection,
    length: f64,
) -> Result<GeodesicPath, GeodesicError> {
    mesh.validate_point(&start.base)?;
    if !(length >= 0.0) || !length.is_finite() {
        return Err(GeodesicError::InvalidLength(length));
    }
    let chart = TangentChart::new(mesh, &start.base);
    let d0 = project_to_face(mesh, start.base.face, &start.direction)?;
    if length == 0.0 {
        return Ok(GeodesicPath::single(mesh, start.base));
    }
    let phi = chart.angle_of(mesh, start.base.face, &d0);
    let (mut face, mut dir) = chart
        .direction_at(mesh, phi)
        .ok_or(GeodesicError::TracingStuck("start direction leaves the mesh boundary"))?;
    let mut x = chart.position;

    let mut waypoints = vec![chart.point_on(mesh, face)];
    let mut positions = vec![x];
    let mut segment_faces = Vec::new();
    let mut remaining = length;

    for _ in 0..MAX_STEPS {
        let [p0, p1, p2] = mesh.face_positions(face);
        let pts = [p0, p1, p2];
        let n = mesh.normal(face);
        let mut best: Option<(f64, usize)> = None;
        for k in 0..3 {
            let a = pts[k];
            let e = pts[(k + 1) % 3] - a;
            let m = e.cross(&n).normalize();
            let speed = dir.dot(&m);
            if speed <= 1e-15 {
                continue;
            }
            let t = ((a - x).dot(&m) / speed).max(0.0);
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, k));
            }
        }
        let (t, k) = best.ok_or(GeodesicError::TracingStuck("no exit edge"))?;

        if remaining <= t {
            let end = x + dir * remaining;
            push(
                &mut waypoints,
                &mut positions,
                &mut segment_faces,
                mesh.locate_in_face(face, &end),
                mesh.position(&mesh.locate_in_face(face, &end)),
                face,
            );
            return Ok(GeodesicPath::from_parts(waypoints, positions, segment_faces));
        }

        let a = pts[k];
        let b = pts[(k + 1) % 3];
        let e = b - a;
        let elen = e.norm();
        let y = x + dir * t;
        let s = ((y - a).dot(&e) / (elen * elen)).clamp(0.0, 1.0);

        let corner = if s * elen < VERTEX_SNAP {
            Some(k)
        } else if (1.0 - s) * elen < VERTEX_SNAP {
            Some((k + 1) % 3)
        } else {
            None
        };

        if let Some(c) = corner {
            let v = mesh.faces()[face][c];
            let vp = mesh.vertices()[v];
            remaining -= (vp - x).norm();
            push(
                &mut waypoints,
                &mut positions,
                &mut segment_faces,
                SurfacePoint::corner(face, c),
                vp,
                face,
            );
            if remaining <= 0.0 {
                return Ok(GeodesicPath::from_parts(waypoints, positions, segment_faces));
            }
            let fan = Fan::build(mesh, v).ok_or(GeodesicError::TracingStuck("isolated vertex"))?;
            if !fan.closed {
                return Err(GeodesicError::TracingStuck("reached a boundary vertex"));
            }
            let back = fan.angle_of(mesh, face, &(-dir));
            let (g, d) = fan
                .direction_at(mesh, back + fan.total / 2.0)
                .ok_or(GeodesicError::TracingStuck("vertex fan"))?;
            x = vp;
            face = g;
            dir = d;
            // express the vertex on the face the path continues in
            if let Some(last) = waypoints.last_mut() {
                *last = SurfacePoint::corner(g, mesh.corner_of(g, v).unwrap_or(0));
            }
        } else {
            let (g, kg) = mesh
                .neighbor(face, k)
                .ok_or(GeodesicError::TracingStuck("reached a boundary edge"))?;
            let crossing = a + e * s;
            remaining -= (crossing - x).norm();
            let mut bary = [0.0; 3];
            bary[kg] = s;
            bary[(kg + 1) % 3] = 1.0 - s;
            push(
                &mut waypoints,
                &mut positions,
                &mut segment_faces,
                SurfacePoint::new(g, bary),
                crossing,
                face,
            );
            if remaining <= 0.0 {
                return Ok(GeodesicPath::from_parts(waypoints, positions, segment_faces));
            }
            let ehat = e / elen;
            let out_f = ehat.cross(&n).normalize();
            let in_g = mesh.normal(g).cross(&(-ehat));
            dir = (ehat * dir.dot(&ehat) + in_g * dir.dot(&out_f)).normalize();
            x = crossing;
            face = g;
        }
    }
    Err(GeodesicError::TracingStuck("step limit exceeded"))
}

fn push(
    waypoints: &mut Vec<SurfacePoint>,
    positions: &mut Vec<Vec3>,
    segment_faces: &mut Vec<usize>,
    p: SurfacePoint,
    x: Vec3,
    face: usize,
) {
    let last = *positions.last().expect("path has a start");
    if (x - last).norm() <= 1e-15 {
        // zero-length step: keep the newer representation only
        *waypoints.last_mut().expect("path has a start") = p;
        return;
    }
    waypoints.push(p);
    positions.push(x);
    segment_faces.push(face);
}

/// Projects `dir` onto the plane of `face` and normalizes it.
pub(crate) fn project_to_face(mesh: &SurfaceMesh, face: usize, dir: &Vec3) -> Result<Vec3, GeodesicError> {
    let n = mesh.normal(face);
    let d = dir - n * dir.dot(&n);
    let len = d.norm();
    if !(len > 1e-12) {
        return Err(GeodesicError::DegenerateDirection);
    }
    Ok(d / len)
}
