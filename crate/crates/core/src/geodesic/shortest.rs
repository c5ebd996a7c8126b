//! Shortest paths: a graph search picks the corridor of faces, the corridor
//! is unfolded into the plane and straightened with a funnel pass, then
//! corners at interior vertices are tested against the other way around the
//! vertex until no flip shortens the path.

use nalgebra::Vector2;

use super::chart::Fan;
use super::graph::face_sequence;
use super::{GeodesicError, GeodesicPath};
use crate::mesh::{SurfaceMesh, SurfacePoint, Vec3};

type Vec2 = Vector2<f64>;

const NO_VERTEX: usize = usize::MAX;
const MAX_FLIPS: usize = 200;

pub fn shortest_path(mesh: &SurfaceMesh, a: &SurfacePoint, b: &SurfacePoint) -> Result<GeodesicPath, GeodesicError> {
    mesh.validate_point(a)?;
    mesh.validate_point(b)?;
    let xa = mesh.position(a);
    let xb = mesh.position(b);
    if (xa - xb).norm() == 0.0 {
        return Ok(GeodesicPath::single(mesh, *a));
    }
    if let Some(path) = direct(mesh, a, b) {
        return Ok(path);
    }
    let graph = mesh.steiner_graph();
    let faces = face_sequence(mesh, graph, a, b).ok_or(GeodesicError::Disconnected)?;
    let mut strip = build_strip(mesh, &faces).ok_or(GeodesicError::Disconnected)?;
    clean_strip(mesh, &mut strip, a, b);
    if strip.len() == 1 {
        if let Some(path) = direct(mesh, a, b) {
            return Ok(path);
        }
    }
    let mut best = straighten(mesh, &strip, a, b);
    for _ in 0..MAX_FLIPS {
        let mut improved = false;
        // corners first: they are the likeliest to shorten the path
        let mut vertices: Vec<usize> = best.corners.iter().map(|c| c.0).collect();
        let mut rest: Vec<usize> = strip.iter().flat_map(|&f| mesh.faces()[f]).collect();
        rest.sort_unstable();
        rest.dedup();
        vertices.extend(rest);
        for v in vertices {
            for mut alt in detours(mesh, &strip, v) {
                clean_strip(mesh, &mut alt, a, b);
                if alt.len() == 1 {
                    if let Some(path) = direct(mesh, a, b) {
                        return Ok(path);
                    }
                    continue;
                }
                let cand = straighten(mesh, &alt, a, b);
                if cand.length < best.length - 1e-12 {
                    strip = alt;
                    best = cand;
                    improved = true;
                    break;
                }
            }
            if improved {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(best.path)
}

/// Straight segment when both points lie on a common face.
fn direct(mesh: &SurfaceMesh, a: &SurfacePoint, b: &SurfacePoint) -> Option<GeodesicPath> {
    let graph = mesh.steiner_graph();
    let fa = graph.point_faces(mesh, a);
    let fb = graph.point_faces(mesh, b);
    let f = *fa.iter().find(|f| fb.contains(f))?;
    let pa = mesh.reexpress(a, f)?;
    let pb = mesh.reexpress(b, f)?;
    Some(GeodesicPath::from_parts(
        vec![pa, pb],
        vec![mesh.position(a), mesh.position(b)],
        vec![f],
    ))
}

fn shared_vertices(mesh: &SurfaceMesh, f: usize, g: usize) -> Vec<usize> {
    let fv = mesh.faces()[f];
    mesh.faces()[g].iter().copied().filter(|v| fv.contains(v)).collect()
}

fn adjacent(mesh: &SurfaceMesh, f: usize, g: usize) -> Option<usize> {
    (0..3).find(|&k| mesh.neighbor(f, k).map(|(h, _)| h) == Some(g))
}

/// Turns the graph's face sequence into a chain of edge-adjacent faces,
/// filling vertex hops with the narrower side of the vertex fan.
fn build_strip(mesh: &SurfaceMesh, faces: &[usize]) -> Option<Vec<usize>> {
    let mut strip = vec![faces[0]];
    for &g in &faces[1..] {
        let f = *strip.last()?;
        if f == g || adjacent(mesh, f, g).is_some() {
            if f != g {
                strip.push(g);
            }
            continue;
        }
        let shared = shared_vertices(mesh, f, g);
        let v = *shared.first()?;
        let fan = Fan::build(mesh, v)?;
        let ccw = fan.route(f, g, true);
        let cw = fan.route(f, g, false);
        let route = match (ccw, cw) {
            (Some(x), Some(y)) => {
                if fan.route_angle(&x) <= fan.route_angle(&y) {
                    x
                } else {
                    y
                }
            }
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => return None,
        };
        strip.extend(route);
        strip.push(g);
    }
    Some(strip)
}

/// Removes immediate backtracks and trims faces at either end that are not
/// needed to reach the endpoints.
fn clean_strip(mesh: &SurfaceMesh, strip: &mut Vec<usize>, a: &SurfacePoint, b: &SurfacePoint) {
    loop {
        let before = strip.len();
        strip.dedup();
        let mut i = 1;
        while i + 1 < strip.len() {
            if strip[i - 1] == strip[i + 1] {
                strip.drain(i..i + 2);
                i = i.saturating_sub(1).max(1);
            } else {
                i += 1;
            }
        }
        while strip.len() >= 2 && mesh.reexpress(a, strip[1]).is_some() {
            strip.remove(0);
        }
        while strip.len() >= 2 && mesh.reexpress(b, strip[strip.len() - 2]).is_some() {
            strip.pop();
        }
        if strip.len() == before {
            break;
        }
    }
}

struct Straightened {
    path: GeodesicPath,
    length: f64,
    /// Mesh vertices where the path bends, with the portal index they sit on.
    corners: Vec<(usize, usize)>,
}

struct Unfolded {
    pos: Vec<Vec2>,
    vertex: Vec<usize>,
    /// (left, right) copy ids per portal, including the start and end.
    portals: Vec<(usize, usize)>,
}

fn unfold(mesh: &SurfaceMesh, strip: &[usize], xa: &Vec3, xb: &Vec3) -> Unfolded {
    let mut pos = Vec::new();
    let mut vertex = Vec::new();
    let f0 = strip[0];
    let [p0, p1, p2] = mesh.face_positions(f0);
    let l01 = (p1 - p0).norm();
    let ex = (p1 - p0) / l01;
    let n0 = mesh.normal(f0);
    let ey = n0.cross(&ex);
    let to2 = |x: &Vec3| Vec2::new((x - p0).dot(&ex), (x - p0).dot(&ey));
    let fv = mesh.faces()[f0];
    // copies of the current face's corners, in mesh order
    let mut cur = [0usize; 3];
    for (k, p) in [p0, p1, p2].iter().enumerate() {
        pos.push(to2(p));
        vertex.push(fv[k]);
        cur[k] = k;
    }
    let start = pos.len();
    pos.push(to2(xa));
    vertex.push(NO_VERTEX);
    let mut portals = vec![(start, start)];

    for w in strip.windows(2) {
        let (f, g) = (w[0], w[1]);
        let k = adjacent(mesh, f, g).expect("strip faces are adjacent");
        let (_, kg) = mesh.neighbor(f, k).expect("adjacent");
        let cp = cur[k];
        let cq = cur[(k + 1) % 3];
        let gv = mesh.faces()[g];
        let [q0, q1, q2] = mesh.face_positions(g);
        let gp = [q0, q1, q2];
        // third vertex of g, placed on the far side of p→q
        let r3 = gp[(kg + 2) % 3];
        let p3 = gp[(kg + 1) % 3];
        let q3 = gp[kg];
        let (pp, pq) = (pos[cp], pos[cq]);
        let base = pq - pp;
        let blen = base.norm();
        let lp = (r3 - p3).norm();
        let lq = (r3 - q3).norm();
        let along = (lp * lp - lq * lq + blen * blen) / (2.0 * blen);
        let h = (lp * lp - along * along).max(0.0).sqrt();
        let ux = base / blen;
        let right = Vec2::new(ux.y, -ux.x);
        let pr = pp + ux * along + right * h;
        let cr = pos.len();
        pos.push(pr);
        vertex.push(gv[(kg + 2) % 3]);
        let mut next = [0usize; 3];
        next[kg] = cq;
        next[(kg + 1) % 3] = cp;
        next[(kg + 2) % 3] = cr;
        portals.push((cq, cp));
        cur = next;
    }

    // end point, located in the last face's unfolded frame
    let fl = *strip.last().expect("non-empty strip");
    let bp = mesh.locate_in_face(fl, xb);
    let end2 = pos[cur[0]] * bp.bary[0] + pos[cur[1]] * bp.bary[1] + pos[cur[2]] * bp.bary[2];
    let end = pos.len();
    pos.push(end2);
    vertex.push(NO_VERTEX);
    portals.push((end, end));
    Unfolded { pos, vertex, portals }
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Simple stupid funnel. Returns corner copies with their portal index,
/// starting with the start point and ending with the end point.
fn funnel(portals: &[(usize, usize)], pos: &[Vec2]) -> Vec<(usize, usize)> {
    let n = portals.len();
    let mut corners = vec![(portals[0].0, 0)];
    let mut apex = portals[0].0;
    let (mut left, mut left_i) = (portals[0].0, 0);
    let (mut right, mut right_i) = (portals[0].1, 0);
    let mut i = 1;
    while i < n {
        let (l, r) = portals[i];
        let pa = pos[apex];
        if cross(pos[right] - pa, pos[r] - pa) >= 0.0 {
            if apex == right || cross(pos[left] - pa, pos[r] - pa) < 0.0 {
                right = r;
                right_i = i;
            } else {
                corners.push((left, left_i));
                apex = left;
                right = apex;
                right_i = left_i;
                i = left_i + 1;
                continue;
            }
        }
        if cross(pos[left] - pa, pos[l] - pa) <= 0.0 {
            if apex == left || cross(pos[right] - pa, pos[l] - pa) > 0.0 {
                left = l;
                left_i = i;
            } else {
                corners.push((right, right_i));
                apex = right;
                left = apex;
                left_i = right_i;
                i = right_i + 1;
                continue;
            }
        }
        i += 1;
    }
    let end = portals[n - 1].0;
    if corners.last().map(|c| c.0) != Some(end) {
        corners.push((end, n - 1));
    }
    corners
}

fn straighten(mesh: &SurfaceMesh, strip: &[usize], a: &SurfacePoint, b: &SurfacePoint) -> Straightened {
    let xa = mesh.position(a);
    let xb = mesh.position(b);
    let u = unfold(mesh, strip, &xa, &xb);
    let corners = funnel(&u.portals, &u.pos);
    let m = strip.len();

    let mut waypoints = vec![mesh.reexpress(a, strip[0]).unwrap_or(*a)];
    let mut positions = vec![xa];
    let mut seg_faces = Vec::new();
    let mut ci = 0;
    for j in 1..m {
        while corners[ci + 1].1 < j {
            ci += 1;
        }
        let (left, right) = u.portals[j];
        let (c0, c1) = (corners[ci], corners[ci + 1]);
        let s = if c1.1 == j && c1.0 != u.portals[m].0 {
            if c1.0 == left {
                1.0
            } else {
                0.0
            }
        } else if c0.1 == j {
            if c0.0 == left {
                1.0
            } else {
                0.0
            }
        } else {
            intersect(u.pos[c0.0], u.pos[c1.0], u.pos[right], u.pos[left])
        };
        let g = strip[j];
        let f = strip[j - 1];
        let k = adjacent(mesh, f, g).expect("strip faces are adjacent");
        let fv = mesh.faces()[f];
        let vp = fv[k];
        let vq = fv[(k + 1) % 3];
        let x = mesh.vertices()[vp] * (1.0 - s) + mesh.vertices()[vq] * s;
        let mut bary = [0.0; 3];
        bary[mesh.corner_of(g, vp).expect("shared vertex")] = 1.0 - s;
        bary[mesh.corner_of(g, vq).expect("shared vertex")] += s;
        push(
            &mut waypoints,
            &mut positions,
            &mut seg_faces,
            SurfacePoint::new(g, bary),
            x,
            f,
        );
    }
    let end = mesh.reexpress(b, strip[m - 1]).unwrap_or(*b);
    push(&mut waypoints, &mut positions, &mut seg_faces, end, xb, strip[m - 1]);
    let path = GeodesicPath::from_parts(waypoints, positions, seg_faces);
    let length = path.length();
    let corners = corners[1..corners.len() - 1]
        .iter()
        .map(|&(c, j)| (u.vertex[c], j))
        .filter(|&(v, _)| v != NO_VERTEX)
        .collect();
    Straightened { path, length, corners }
}

fn push(
    waypoints: &mut Vec<SurfacePoint>,
    positions: &mut Vec<Vec3>,
    seg_faces: &mut Vec<usize>,
    p: SurfacePoint,
    x: Vec3,
    face: usize,
) {
    let last = *positions.last().expect("non-empty");
    if (x - last).norm() <= 1e-15 {
        *waypoints.last_mut().expect("non-empty") = p;
        return;
    }
    waypoints.push(p);
    positions.push(x);
    seg_faces.push(face);
}

/// Parameter along `r → l` where segment `p0 → p1` crosses it, clamped.
fn intersect(p0: Vec2, p1: Vec2, r: Vec2, l: Vec2) -> f64 {
    let d = p1 - p0;
    let e = l - r;
    let denom = cross(d, e);
    let s = if denom.abs() < 1e-300 {
        // parallel: project the segment start onto the portal
        (p0 - r).dot(&e) / e.norm_squared()
    } else {
        cross(r - p0, d) / denom
    };
    s.clamp(0.0, 1.0)
}

/// Alternative strips that pass vertex `v` on the other side, one per
/// maximal run of consecutive strip faces around `v`.
fn detours(mesh: &SurfaceMesh, strip: &[usize], v: usize) -> Vec<Vec<usize>> {
    let contains = |f: usize| mesh.faces()[f].contains(&v);
    let Some(fan) = Fan::build(mesh, v) else {
        return vec![];
    };
    if !fan.closed {
        return vec![];
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < strip.len() {
        if !contains(strip[i]) {
            i += 1;
            continue;
        }
        let i0 = i;
        while i + 1 < strip.len() && contains(strip[i + 1]) {
            i += 1;
        }
        let i1 = i;
        i += 1;
        let (e, x) = (strip[i0], strip[i1]);
        if e == x {
            continue;
        }
        let current = &strip[i0 + 1..i1];
        let (Some(ccw), Some(cw)) = (fan.route(e, x, true), fan.route(e, x, false)) else {
            continue;
        };
        let alt = if ccw.as_slice() == current {
            cw
        } else if cw.as_slice() == current {
            ccw
        } else {
            continue;
        };
        let mut s = strip[..=i0].to_vec();
        s.extend(alt);
        s.extend_from_slice(&strip[i1..]);
        out.push(s);
    }
    out
}
