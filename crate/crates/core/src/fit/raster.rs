use serde::{Deserialize, Serialize};

use super::camera::Camera;
use super::{FitError, RigidPose};
use crate::mesh::{SurfaceMesh, Vec3};

/// One bit per pixel, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SilhouetteMask {
    pub width: usize,
    pub height: usize,
    bits: Vec<u64>,
}

impl SilhouetteMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![0; (width * height).div_ceil(64)],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y);
                }
            }
        }
        m
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        let i = y * self.width + x;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, x: usize, y: usize) {
        let i = y * self.width + x;
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    fn same_size(&self, o: &SilhouetteMask) -> Result<(), FitError> {
        if self.width != o.width || self.height != o.height {
            return Err(FitError::DimensionMismatch(format!(
                "{}x{} mask against {}x{}",
                self.width, self.height, o.width, o.height
            )));
        }
        Ok(())
    }

    /// `(|A∩B|, |A∪B|)`.
    pub fn overlap(&self, o: &SilhouetteMask) -> Result<(usize, usize), FitError> {
        self.same_size(o)?;
        let mut inter = 0;
        let mut union = 0;
        for (a, b) in self.bits.iter().zip(&o.bits) {
            inter += (a & b).count_ones() as usize;
            union += (a | b).count_ones() as usize;
        }
        Ok((inter, union))
    }

    pub fn union_with(&mut self, o: &SilhouetteMask) -> Result<(), FitError> {
        self.same_size(o)?;
        for (a, b) in self.bits.iter_mut().zip(&o.bits) {
            *a |= b;
        }
        Ok(())
    }
}

/// `1 − |A∩B|/|A∪B|`; two empty masks score 1.
pub fn loss_mask(predicted: &SilhouetteMask, observed: &SilhouetteMask) -> Result<f64, FitError> {
    let (inter, union) = predicted.overlap(observed)?;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(1.0 - inter as f64 / union as f64)
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn top_left(a: [f64; 2], b: [f64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy < 0.0 || (dy == 0.0 && dx < 0.0)
}

/// Sets the pixels whose centers fall inside a projected triangle.
pub fn fill_triangle(mask: &mut SilhouetteMask, tri: [[f64; 2]; 3]) {
    let [a, mut b, mut c] = tri;
    let area = edge(a, b, c);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    if area < 0.0 {
        std::mem::swap(&mut b, &mut c);
    }
    let lo_x = a[0].min(b[0]).min(c[0]);
    let hi_x = a[0].max(b[0]).max(c[0]);
    let lo_y = a[1].min(b[1]).min(c[1]);
    let hi_y = a[1].max(b[1]).max(c[1]);
    let x0 = (lo_x - 0.5).ceil().max(0.0);
    let y0 = (lo_y - 0.5).ceil().max(0.0);
    let x1 = (hi_x - 0.5).floor().min(mask.width as f64 - 1.0);
    let y1 = (hi_y - 0.5).floor().min(mask.height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let (tl_ab, tl_bc, tl_ca) = (top_left(a, b), top_left(b, c), top_left(c, a));
    let inside = |w: f64, tl: bool| w > 0.0 || (w == 0.0 && tl);
    for y in y0 as usize..=y1 as usize {
        let py = y as f64 + 0.5;
        for x in x0 as usize..=x1 as usize {
            let p = [x as f64 + 0.5, py];
            if inside(edge(a, b, p), tl_ab) && inside(edge(b, c, p), tl_bc) && inside(edge(c, a, p), tl_ca) {
                mask.set(x, y);
            }
        }
    }
}

/// Silhouette of the given faces over already-posed positions. Faces with
/// a vertex at depth ≤ 1e-6 are skipped.
pub fn rasterize_faces(camera: &Camera, positions: &[Vec3], faces: &[[usize; 3]], mask: &mut SilhouetteMask) {
    let projected: Vec<Option<[f64; 2]>> = positions.iter().map(|p| camera.project(p)).collect();
    for f in faces {
        if let (Some(a), Some(b), Some(c)) = (projected[f[0]], projected[f[1]], projected[f[2]]) {
            fill_triangle(mask, [a, b, c]);
        }
    }
}

/// Renders `mesh` under `pose` into a binary silhouette, no depth test.
pub fn rasterize_silhouette(mesh: &SurfaceMesh, pose: &RigidPose, camera: &Camera) -> Result<SilhouetteMask, FitError> {
    if mesh.num_faces() == 0 {
        return Err(FitError::InvalidInput("empty mesh".into()));
    }
    let posed: Vec<Vec3> = mesh.vertices().iter().map(|p| pose.apply(p)).collect();
    if posed.iter().all(|p| p.z <= super::camera::MIN_DEPTH) {
        return Err(FitError::BehindCamera);
    }
    let mut mask = SilhouetteMask::new(camera.width, camera.height);
    rasterize_faces(camera, &posed, mesh.faces(), &mut mask);
    Ok(mask)
}
