//! Three-stage registration of an object to a body.
//!
//! Stage 1 aligns the object to the body through contact correspondences.
//! Stage 2 refines the object's rotation, translation and scale against its
//! silhouette while penalizing contact drift and interpenetration. Stage 3
//! refines the joint angles of the contacting limbs against the human
//! silhouette. Each stage runs Adam and returns its lowest-loss iterate.

mod adam;
mod camera;
mod loss;
mod raster;
mod rotation;
mod stages;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body::BodyError;
use crate::mesh::{SurfaceMesh, Vec3};

pub use adam::{minimize, Adam, Minimized, StopRule};
pub use camera::{project_points, Camera};
pub use loss::{contact_gradient, contact_pairs, loss_contact, loss_penetration, penetration_gradient};
pub use raster::{fill_triangle, loss_mask, rasterize_faces, rasterize_silhouette, SilhouetteMask};
pub use rotation::{axis_angle, rotation_jacobian, rotation_matrix};
pub use stages::{
    contact_chains, fit, stage1_register, stage2_refine, stage2_terms, stage3_refine, FitInputs, FitResult, Problem,
    Stage2Terms, StageReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("point behind the camera")]
    BehindCamera,
    #[error("no correspondences")]
    EmptyCorrespondences,
    #[error("correspondences are degenerate (centered rank {0})")]
    DegenerateCorrespondences(usize),
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("no contacting limb to refine")]
    EmptyChains,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("stage {stage}: {error}")]
    Stage { stage: usize, error: Box<FitError> },
    #[error(transparent)]
    Body(#[from] BodyError),
}

/// `p ↦ scale·R(rotation)·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation: Vec3,
    pub translation: Vec3,
    pub scale: f64,
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: Vec3::zeros(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        rotation_matrix(&self.rotation) * p * self.scale + self.translation
    }

    /// `[r, t, s]`.
    pub fn params(&self) -> [f64; 7] {
        let (r, t) = (self.rotation, self.translation);
        [r.x, r.y, r.z, t.x, t.y, t.z, self.scale]
    }

    pub fn from_params(x: &[f64]) -> Self {
        Self {
            rotation: Vec3::new(x[0], x[1], x[2]),
            translation: Vec3::new(x[3], x[4], x[5]),
            scale: x[6],
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let finite = self.params().iter().all(|x| x.is_finite());
        if !finite || !(self.scale > 0.0) {
            return Err(FitError::InvalidInput(format!("rigid pose {self:?}")));
        }
        Ok(())
    }
}

/// Mesh translated so its vertex centroid is the origin, with that centroid.
pub fn center_mesh(mesh: &SurfaceMesh) -> (SurfaceMesh, Vec3) {
    let c = mesh.vertices().iter().sum::<Vec3>() / mesh.num_vertices().max(1) as f64;
    (mesh.map_vertices(|p| p - c), c)
}

/// Loss weights for one refinement stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageWeights {
    pub contact: f64,
    pub penetration: f64,
    pub mask: f64,
    /// Scale prior in stage 2, joint prior in stage 3.
    pub prior: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub rotation: f64,
    pub translation: f64,
    pub scale: f64,
    pub joint: f64,
}

/// Finite-difference steps for the silhouette terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSteps {
    pub rotation: f64,
    pub translation: f64,
    /// Relative to the current scale.
    pub scale: f64,
    pub joint: f64,
    /// Step for the smooth terms differenced in stage 3.
    pub smooth: f64,
}

/// Missing fields take their default values when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub stage2: StageWeights,
    pub stage3: StageWeights,
    pub learning_rates: LearningRates,
    pub iterations: usize,
    /// Early stop when the best loss improves by less than this relative
    /// amount over `window` iterations.
    pub tolerance: f64,
    pub window: usize,
    pub fd: FdSteps,
    pub sdf_rebuild: usize,
    pub voxel: f64,
    pub padding: f64,
    /// Number of stages to run, 1 to 3.
    pub stages: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            stage2: StageWeights {
                contact: 4.0,
                penetration: 100.0,
                mask: 0.4,
                prior: 4.0,
            },
            stage3: StageWeights {
                contact: 4.0,
                penetration: 50.0,
                mask: 0.1,
                prior: 0.05,
            },
            learning_rates: LearningRates {
                rotation: 0.04,
                translation: 0.02,
                scale: 0.01,
                joint: 0.02,
            },
            iterations: 300,
            tolerance: 1e-5,
            window: 20,
            fd: FdSteps {
                rotation: 0.01,
                translation: 0.004,
                scale: 0.01,
                joint: 0.01,
                smooth: 1e-6,
            },
            sdf_rebuild: 25,
            voxel: crate::body::DEFAULT_VOXEL,
            padding: crate::body::DEFAULT_PADDING,
            stages: 3,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let w = [self.stage2, self.stage3];
        if w.iter()
            .any(|w| [w.contact, w.penetration, w.mask, w.prior].iter().any(|x| !(*x >= 0.0)))
        {
            return Err(FitError::InvalidInput("weights must be nonnegative".into()));
        }
        let l = self.learning_rates;
        if [l.rotation, l.translation, l.scale, l.joint]
            .iter()
            .any(|x| !(*x > 0.0 && *x < 1.0))
        {
            return Err(FitError::InvalidInput("learning rates must lie in (0, 1)".into()));
        }
        if !(1..=3).contains(&self.stages) || self.window == 0 || self.sdf_rebuild == 0 {
            return Err(FitError::InvalidInput("stages, window and rebuild period".into()));
        }
        Ok(())
    }
}
