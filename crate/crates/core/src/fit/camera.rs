use serde::{Deserialize, Serialize};

use super::FitError;
use crate::mesh::Vec3;

/// Pinhole intrinsics. The camera sits at the origin looking down +z with
/// image rows growing along +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

pub const MIN_DEPTH: f64 = 1e-6;

impl Camera {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.fx > 0.0 && self.fy > 0.0) || self.width == 0 || self.height == 0 {
            return Err(FitError::InvalidInput("camera needs positive focals and size".into()));
        }
        Ok(())
    }

    /// Pixel coordinates of one point, or `None` at depth ≤ 1e-6.
    pub fn project(&self, p: &Vec3) -> Option<[f64; 2]> {
        if p.z <= MIN_DEPTH {
            return None;
        }
        Some([self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy])
    }
}

/// `u = fx·x/z + cx`, `v = fy·y/z + cy` for every point.
pub fn project_points(camera: &Camera, points: &[Vec3]) -> Result<Vec<[f64; 2]>, FitError> {
    points
        .iter()
        .map(|p| camera.project(p).ok_or(FitError::BehindCamera))
        .collect()
}
