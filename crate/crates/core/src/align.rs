//! Closed-form least-squares alignment of paired point sets.

use nalgebra::{Matrix3, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("point sets differ in size: {0} vs {1}")]
    CountMismatch(usize, usize),
    #[error("configuration is degenerate (centered rank {0})")]
    Degenerate(usize),
}

/// `x ↦ scale·R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub scale: f64,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * x * self.scale + self.translation
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            rotation: self.rotation * other.rotation,
            translation: self.apply(&other.translation),
            scale: self.scale * other.scale,
        }
    }
}

/// Rank of a centered point set, counting singular values above
/// `1e-9 ×` the largest.
pub fn centered_rank(points: &[Vec3]) -> usize {
    if points.is_empty() {
        return 0;
    }
    let mean = points.iter().sum::<Vec3>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let sv = cov.singular_values();
    let top = sv.max();
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > top * 1e-12).count()
}

/// Least-squares similarity (or rigid, when `with_scale` is false)
/// minimizing `Σ‖s·R·x_i + t − y_i‖²`.
pub fn umeyama(source: &[Vec3], target: &[Vec3], with_scale: bool) -> Result<SimilarityTransform, AlignError> {
    if source.len() != target.len() {
        return Err(AlignError::CountMismatch(source.len(), target.len()));
    }
    let rank = centered_rank(source);
    if source.len() < 3 || rank < 2 {
        return Err(AlignError::Degenerate(rank));
    }
    let n = source.len() as f64;
    let mx = source.iter().sum::<Vec3>() / n;
    let my = target.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    let mut var = 0.0;
    for (x, y) in source.iter().zip(target) {
        let dx = x - mx;
        cov += (y - my) * dx.transpose();
        var += dx.norm_squared();
    }
    cov /= n;
    var /= n;
    let svd = SVD::new(cov, true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = u * d * vt;
    let scale = if with_scale {
        let mut trace = 0.0;
        for k in 0..3 {
            trace += svd.singular_values[k] * d[(k, k)];
        }
        trace / var
    } else {
        1.0
    };
    Ok(SimilarityTransform {
        rotation,
        translation: my - rotation * mx * scale,
        scale,
    })
}
