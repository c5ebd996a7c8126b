use serde::{Deserialize, Serialize};

use super::BodyError;
use crate::mesh::{closest_point_on_triangle, SurfaceMesh, Vec3};

pub const DEFAULT_VOXEL: f64 = 0.02;
pub const DEFAULT_PADDING: f64 = 0.1;

/// Signed distances sampled on a regular grid, negative inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdfGrid {
    pub origin: Vec3,
    pub voxel: f64,
    pub dims: [usize; 3],
    /// x-fastest node values.
    pub values: Vec<f64>,
    /// Largest value on the grid boundary.
    pub max_boundary: f64,
}

impl SdfGrid {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.voxel
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn upper(&self) -> Vec3 {
        self.node(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }
}

// half of the 26-neighborhood; the other half is its negation
const HALF: [[i32; 3]; 13] = [
    [-1, 0, 0],
    [-1, -1, 0],
    [0, -1, 0],
    [1, -1, 0],
    [-1, -1, -1],
    [0, -1, -1],
    [1, -1, -1],
    [-1, 0, -1],
    [0, 0, -1],
    [1, 0, -1],
    [-1, 1, -1],
    [0, 1, -1],
    [1, 1, -1],
];

/// Samples the signed distance to a closed mesh.
///
/// Nodes within one voxel of a face get exact closest points; the rest
/// inherit closest points from their neighbors by alternating raster sweeps.
/// Signs come from crossing parity along z-columns.
pub fn build_sdf(mesh: &SurfaceMesh, voxel: f64, padding: f64) -> Result<SdfGrid, BodyError> {
    if !mesh.is_closed() {
        return Err(BodyError::OpenMesh);
    }
    if !(voxel > 0.0) || !(padding >= 0.0) {
        return Err(BodyError::InvalidGrid(format!("voxel {voxel}, padding {padding}")));
    }
    let (lo, hi) = mesh.bounding_box();
    let origin = lo - Vec3::repeat(padding);
    let mut dims = [0usize; 3];
    for k in 0..3 {
        dims[k] = ((hi[k] - lo[k] + 2.0 * padding) / voxel).ceil() as usize + 1;
    }
    let count = dims[0] * dims[1] * dims[2];
    if count > 50_000_000 {
        return Err(BodyError::InvalidGrid(format!("{count} nodes")));
    }
    let mut grid = SdfGrid {
        origin,
        voxel,
        dims,
        values: vec![f64::INFINITY; count],
        max_boundary: 0.0,
    };
    let nearest = closest_points(mesh, &grid);
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let id = grid.index(i, j, k);
                grid.values[id] = (grid.node(i, j, k) - nearest[id]).norm();
            }
        }
    }
    apply_signs(mesh, &mut grid);
    let mut max_boundary = f64::NEG_INFINITY;
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let edge = i == 0 || j == 0 || k == 0 || i + 1 == dims[0] || j + 1 == dims[1] || k + 1 == dims[2];
                if edge {
                    max_boundary = max_boundary.max(grid.value(i, j, k));
                }
            }
        }
    }
    grid.max_boundary = max_boundary.max(0.0);
    Ok(grid)
}

fn node_range(x0: f64, x1: f64, origin: f64, voxel: f64, n: usize) -> (usize, usize) {
    let a = ((x0 - origin) / voxel).floor().max(0.0) as usize;
    let b = (((x1 - origin) / voxel).ceil().max(0.0) as usize).min(n - 1);
    (a.min(n - 1), b)
}

fn closest_points(mesh: &SurfaceMesh, grid: &SdfGrid) -> Vec<Vec3> {
    let dims = grid.dims;
    let unknown = Vec3::repeat(f64::INFINITY);
    let mut cp = vec![unknown; grid.values.len()];
    let mut d2 = vec![f64::INFINITY; grid.values.len()];
    for f in 0..mesh.num_faces() {
        let [a, b, c] = mesh.face_positions(f);
        let lo = a.inf(&b).inf(&c) - Vec3::repeat(grid.voxel);
        let hi = a.sup(&b).sup(&c) + Vec3::repeat(grid.voxel);
        let r: Vec<(usize, usize)> = (0..3)
            .map(|k| node_range(lo[k], hi[k], grid.origin[k], grid.voxel, dims[k]))
            .collect();
        for k in r[2].0..=r[2].1 {
            for j in r[1].0..=r[1].1 {
                for i in r[0].0..=r[0].1 {
                    let p = grid.node(i, j, k);
                    let bc = closest_point_on_triangle(&p, &a, &b, &c);
                    let x = a * bc[0] + b * bc[1] + c * bc[2];
                    let dd = (x - p).norm_squared();
                    let id = grid.index(i, j, k);
                    if dd < d2[id] {
                        d2[id] = dd;
                        cp[id] = x;
                    }
                }
            }
        }
    }
    let n = [dims[0] as i64, dims[1] as i64, dims[2] as i64];
    for _ in 0..8 {
        let mut changed = false;
        for sign in [1i64, -1] {
            let order: Box<dyn Iterator<Item = usize>> = if sign > 0 {
                Box::new(0..cp.len())
            } else {
                Box::new((0..cp.len()).rev())
            };
            for id in order {
                let i = (id % dims[0]) as i64;
                let j = ((id / dims[0]) % dims[1]) as i64;
                let k = (id / (dims[0] * dims[1])) as i64;
                let p = grid.node(i as usize, j as usize, k as usize);
                for o in &HALF {
                    let (ni, nj, nk) = (i + sign * o[0] as i64, j + sign * o[1] as i64, k + sign * o[2] as i64);
                    if ni < 0 || nj < 0 || nk < 0 || ni >= n[0] || nj >= n[1] || nk >= n[2] {
                        continue;
                    }
                    let nid = grid.index(ni as usize, nj as usize, nk as usize);
                    if d2[nid].is_infinite() {
                        continue;
                    }
                    let dd = (cp[nid] - p).norm_squared();
                    if dd < d2[id] {
                        d2[id] = dd;
                        cp[id] = cp[nid];
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    cp
}

/// Edge function with a tie rule that is antisymmetric in the edge
/// direction, so a point on a shared edge is owned by exactly one face.
fn edge_owns(p: [f64; 2], q: [f64; 2], t: [f64; 2]) -> bool {
    let flip = (q[0], q[1]) < (p[0], p[1]);
    let (a, b) = if flip { (q, p) } else { (p, q) };
    let mut w = (b[0] - a[0]) * (t[1] - a[1]) - (b[1] - a[1]) * (t[0] - a[0]);
    if flip {
        w = -w;
    }
    if w != 0.0 {
        return w > 0.0;
    }
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    dy < 0.0 || (dy == 0.0 && dx < 0.0)
}

/// Height of the face plane over `t` if the face's xy-projection owns `t`.
fn column_hit(tri: &[Vec3; 3], t: [f64; 2]) -> Option<f64> {
    let mut p: [[f64; 2]; 3] = [[tri[0].x, tri[0].y], [tri[1].x, tri[1].y], [tri[2].x, tri[2].y]];
    let area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
    if area == 0.0 {
        return None;
    }
    let mut z = [tri[0].z, tri[1].z, tri[2].z];
    if area < 0.0 {
        p.swap(1, 2);
        z.swap(1, 2);
    }
    if !(edge_owns(p[0], p[1], t) && edge_owns(p[1], p[2], t) && edge_owns(p[2], p[0], t)) {
        return None;
    }
    let area = area.abs();
    let w0 = ((p[1][0] - t[0]) * (p[2][1] - t[1]) - (p[1][1] - t[1]) * (p[2][0] - t[0])) / area;
    let w1 = ((p[2][0] - t[0]) * (p[0][1] - t[1]) - (p[2][1] - t[1]) * (p[0][0] - t[0])) / area;
    Some(w0 * z[0] + w1 * z[1] + (1.0 - w0 - w1) * z[2])
}

fn apply_signs(mesh: &SurfaceMesh, grid: &mut SdfGrid) {
    let [nx, ny, nz] = grid.dims;
    let mut columns: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
    for f in 0..mesh.num_faces() {
        let [a, b, c] = mesh.face_positions(f);
        let lo = a.inf(&b).inf(&c);
        let hi = a.sup(&b).sup(&c);
        let (i0, i1) = node_range(lo.x, hi.x, grid.origin.x, grid.voxel, nx);
        let (j0, j1) = node_range(lo.y, hi.y, grid.origin.y, grid.voxel, ny);
        for j in j0..=j1 {
            for i in i0..=i1 {
                columns[j * nx + i].push(f as u32);
            }
        }
    }
    let mut hits = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let col = &columns[j * nx + i];
            if col.is_empty() {
                continue;
            }
            let base = grid.node(i, j, 0);
            let t = [base.x, base.y];
            hits.clear();
            for &f in col {
                if let Some(z) = column_hit(&mesh.face_positions(f as usize), t) {
                    hits.push(z);
                }
            }
            if hits.is_empty() {
                continue;
            }
            hits.sort_by(f64::total_cmp);
            let mut h = 0;
            for k in 0..nz {
                let z = grid.origin.z + k as f64 * grid.voxel;
                while h < hits.len() && hits[h] <= z {
                    h += 1;
                }
                // odd number of crossings below means inside
                if h % 2 == 1 {
                    let id = grid.index(i, j, k);
                    grid.values[id] = -grid.values[id];
                }
            }
        }
    }
}

fn locate(grid: &SdfGrid, p: &Vec3) -> Option<([usize; 3], [f64; 3])> {
    let mut cell = [0usize; 3];
    let mut frac = [0.0; 3];
    for k in 0..3 {
        let mut u = (p[k] - grid.origin[k]) / grid.voxel;
        // absorb rounding so node queries return stored values
        if (u - u.round()).abs() < 1e-9 {
            u = u.round();
        }
        let top = (grid.dims[k] - 1) as f64;
        if !(u >= 0.0 && u <= top) {
            return None;
        }
        let c = (u.floor() as usize).min(grid.dims[k].saturating_sub(2));
        cell[k] = c;
        frac[k] = u - c as f64;
    }
    Some((cell, frac))
}

fn outside(grid: &SdfGrid, p: &Vec3) -> (f64, Vec3) {
    let lo = grid.origin;
    let hi = grid.upper();
    let clamped = p.sup(&lo).inf(&hi);
    let d = p - clamped;
    let n = d.norm();
    let g = if n > 0.0 { d / n } else { Vec3::zeros() };
    (n + grid.max_boundary, g)
}

/// Trilinear interpolation inside the grid; outside, distance to the grid
/// box plus the largest boundary value.
pub fn query_sdf(grid: &SdfGrid, p: &Vec3) -> f64 {
    query_sdf_gradient(grid, p).0
}

/// [`query_sdf`] with its spatial gradient.
pub fn query_sdf_gradient(grid: &SdfGrid, p: &Vec3) -> (f64, Vec3) {
    let Some((c, f)) = locate(grid, p) else {
        return outside(grid, p);
    };
    let single = |k: usize| grid.dims[k] == 1;
    let mut value = 0.0;
    let mut grad = Vec3::zeros();
    for corner in 0..8 {
        let o = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
        if (0..3).any(|k| o[k] == 1 && single(k)) {
            continue;
        }
        let v = grid.value(c[0] + o[0], c[1] + o[1], c[2] + o[2]);
        let w: [f64; 3] = std::array::from_fn(|k| if o[k] == 1 { f[k] } else { 1.0 - f[k] });
        let dw: [f64; 3] = std::array::from_fn(|k| if o[k] == 1 { 1.0 } else { -1.0 });
        value += v * w[0] * w[1] * w[2];
        grad.x += v * dw[0] * w[1] * w[2];
        grad.y += v * w[0] * dw[1] * w[2];
        grad.z += v * w[0] * w[1] * dw[2];
    }
    (value, grad / grid.voxel)
}
