use std::collections::HashMap;

use crate::mesh::{SurfaceMesh, Vec3};

/// Icosphere centered at the origin: 20·4^`subdivisions` faces.
pub fn icosphere(subdivisions: u32, radius: f64) -> SurfaceMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let a = midpoint(f[0], f[1], &mut verts);
            let b = midpoint(f[1], f[2], &mut verts);
            let c = midpoint(f[2], f[0], &mut verts);
            next.push([f[0], a, c]);
            next.push([f[1], b, a]);
            next.push([f[2], c, b]);
            next.push([a, b, c]);
        }
        faces = next;
    }
    for v in &mut verts {
        *v *= radius;
    }
    SurfaceMesh::new(verts, faces).expect("icosphere is manifold")
}

/// Square grid in the z = 0 plane spanning `[-size/2, size/2]²`, with
/// `cells × cells` quads split along alternating diagonals. Normal is +z.
pub fn plane(cells: usize, size: f64) -> SurfaceMesh {
    let n = cells + 1;
    let h = size / cells as f64;
    let mut verts = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            verts.push(Vec3::new(-size / 2.0 + i as f64 * h, -size / 2.0 + j as f64 * h, 0.0));
        }
    }
    let mut faces = Vec::with_capacity(cells * cells * 2);
    for j in 0..cells {
        for i in 0..cells {
            let a = j * n + i;
            let b = a + 1;
            let c = a + n + 1;
            let d = a + n;
            if (i + j) % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    SurfaceMesh::new(verts, faces).expect("plane grid is manifold")
}

/// Closed, outward-oriented box centered at `center` with edge lengths
/// `size`, each side subdivided into a grid of `segments` cells.
pub fn subdivided_box(center: Vec3, size: Vec3, segments: [usize; 3]) -> SurfaceMesh {
    let (verts, faces) = box_parts(center, size, segments);
    SurfaceMesh::new(verts, faces).expect("box is manifold")
}

/// Unit cube centered at the origin, two triangles per side.
pub fn unit_cube() -> SurfaceMesh {
    subdivided_box(Vec3::zeros(), Vec3::repeat(1.0), [1, 1, 1])
}

pub(crate) fn box_parts(center: Vec3, size: Vec3, segments: [usize; 3]) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let [nx, ny, nz] = segments;
    let dims = [nx, ny, nz];
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut verts = Vec::new();
    let mut vid = |p: [usize; 3], verts: &mut Vec<Vec3>| -> usize {
        *index.entry(p).or_insert_with(|| {
            let mut x = Vec3::zeros();
            for k in 0..3 {
                x[k] = center[k] - size[k] / 2.0 + size[k] * p[k] as f64 / dims[k] as f64;
            }
            verts.push(x);
            verts.len() - 1
        })
    };
    let mut faces = Vec::new();
    // (fixed axis, u axis, v axis) with u × v = +fixed
    for (a, u, v) in [(0usize, 1usize, 2usize), (1, 2, 0), (2, 0, 1)] {
        for side in [0, dims[a]] {
            for i in 0..dims[u] {
                for j in 0..dims[v] {
                    let corner = |di: usize, dj: usize| {
                        let mut p = [0usize; 3];
                        p[a] = side;
                        p[u] = i + di;
                        p[v] = j + dj;
                        p
                    };
                    let q = [
                        vid(corner(0, 0), &mut verts),
                        vid(corner(1, 0), &mut verts),
                        vid(corner(1, 1), &mut verts),
                        vid(corner(0, 1), &mut verts),
                    ];
                    if side == 0 {
                        faces.push([q[0], q[2], q[1]]);
                        faces.push([q[0], q[3], q[2]]);
                    } else {
                        faces.push([q[0], q[1], q[2]]);
                        faces.push([q[0], q[2], q[3]]);
                    }
                }
            }
        }
    }
    (verts, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_counts() {
        assert_eq!(icosphere(3, 1.0).num_faces(), 1280);
        assert_eq!(plane(4, 1.0).num_faces(), 32);
        let b = subdivided_box(Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0), [2, 3, 4]);
        assert!(b.is_closed());
        assert_eq!(b.num_faces(), 2 * 2 * (2 * 3 + 3 * 4 + 4 * 2));
    }

    #[test]
    fn box_normals_point_outward() {
        let b = subdivided_box(Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 2.0, 3.0), [2, 2, 2]);
        let c = Vec3::new(1.0, 0.0, 0.0);
        for f in 0..b.num_faces() {
            let [p, q, r] = b.face_positions(f);
            let centroid = (p + q + r) / 3.0;
            assert!(b.normal(f).dot(&(centroid - c)) > 0.0);
        }
        let s = icosphere(1, 1.0);
        for f in 0..s.num_faces() {
            let [p, q, r] = s.face_positions(f);
            assert!(s.normal(f).dot(&((p + q + r) / 3.0)) > 0.0);
        }
    }
}
