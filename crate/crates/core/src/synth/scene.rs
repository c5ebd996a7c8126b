use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{humanoid, subdivided_box};
use crate::body::{joint_transforms, pose_body, BodyModel, PoseVector};
use crate::contact::{Correspondence, CorrespondenceSet};
use crate::fit::{axis_angle, rasterize_silhouette, Camera, RigidPose, SilhouetteMask};
use crate::mesh::{SurfaceMesh, Vec3};

/// A humanoid holding a box between its palms, with rendered masks.
#[derive(Debug, Clone)]
pub struct GraspScene {
    pub body_model: BodyModel,
    pub gt_pose: PoseVector,
    pub gt_body: SurfaceMesh,
    pub camera: Camera,
    /// Box centered at the origin with unit largest extent.
    pub object: SurfaceMesh,
    pub gt_object_pose: RigidPose,
    pub gt_object: SurfaceMesh,
    /// Palm vertices paired with their closest points on the box.
    pub contacts: CorrespondenceSet,
    pub object_mask: SilhouetteMask,
    pub human_mask: SilhouetteMask,
}

/// A perturbed starting point for fitting a [`GraspScene`].
#[derive(Debug, Clone)]
pub struct GraspTrial {
    pub seed: u64,
    pub init_pose: PoseVector,
    pub init_scale: f64,
    /// The box in a displaced, rotated frame; same connectivity as the
    /// scene's object so the contacts stay valid.
    pub object: SurfaceMesh,
}

pub const ELBOW_PERTURBATION: f64 = 0.2;
pub const SCALE_PERTURBATION: f64 = 0.1;
pub const FRAME_TRANSLATION: f64 = 0.1;
pub const FRAME_ROTATION: f64 = 15.0 * PI / 180.0;

const PALM_GAP: f64 = 0.01;
const BOX_HEIGHT: f64 = 0.2;
const BOX_DEPTH: f64 = 0.14;

fn from_columns(x: Vec3, y: Vec3, z: Vec3) -> Vec3 {
    axis_angle(&Matrix3::from_columns(&[x, y, z]))
}

/// Both arms reach forward with palms facing each other and hold a box.
/// The body faces the camera from about 2.2 m.
pub fn grasp_scene() -> GraspScene {
    let model = humanoid();
    let mut pose = PoseVector::zeros(model.num_joints());
    pose.rotations[0] = Vec3::new(PI, 0.0, 0.0);
    let (x, y, z) = (Vec3::x(), Vec3::y(), Vec3::z());
    // left arm: +x to +z, palm normal −y to −x
    pose.rotations[5] = from_columns(z, x, y);
    // right arm: −x to +z, palm normal −y to +x
    pose.rotations[8] = from_columns(-z, -x, y);
    let body = pose_body(&model, &pose).expect("valid pose");

    let palm = |part: &str, sign: f64| -> Vec<usize> {
        let verts = model.part_vertices(part).expect("part exists");
        let extreme = verts
            .iter()
            .map(|&v| sign * body.vertices()[v].x)
            .fold(f64::NEG_INFINITY, f64::max);
        verts
            .into_iter()
            .filter(|&v| (sign * body.vertices()[v].x - extreme).abs() < 1e-9)
            .collect()
    };
    let left = palm("leftHand", -1.0);
    let right = palm("rightHand", 1.0);
    let mean = |vs: &[usize]| vs.iter().map(|&v| body.vertices()[v]).sum::<Vec3>() / vs.len() as f64;
    let (lc, rc) = (mean(&left), mean(&right));
    let width = lc.x - rc.x - 2.0 * PALM_GAP;
    let center = (lc + rc) / 2.0;

    // place the box center 1.6 m in front of the camera
    let shift = Vec3::new(0.0, 0.08, 1.6) - center;
    pose.translation = shift;
    let gt_body = pose_body(&model, &pose).expect("valid pose");

    let extent = Vec3::new(width, BOX_HEIGHT, BOX_DEPTH);
    let scale = extent.max();
    let object = subdivided_box(Vec3::zeros(), extent / scale, [14, 8, 8]);
    let gt_object_pose = RigidPose {
        rotation: Vec3::zeros(),
        translation: center + shift,
        scale,
    };
    let gt_object = object.map_vertices(|p| gt_object_pose.apply(p));

    let mut contacts = CorrespondenceSet::default();
    for &v in left.iter().chain(&right) {
        let (sp, _) = gt_object.closest_point(&gt_body.vertices()[v]);
        contacts.pairs.push(Correspondence {
            body_vertex: v,
            object_point: sp,
        });
    }
    contacts.patch_ids = vec![0, 1];

    let camera = Camera {
        fx: 1000.0,
        fy: 1000.0,
        cx: 320.0,
        cy: 240.0,
        width: 640,
        height: 480,
    };
    let object_mask = rasterize_silhouette(&object, &gt_object_pose, &camera).expect("object in view");
    let human_mask = rasterize_silhouette(&gt_body, &RigidPose::identity(), &camera).expect("body in view");
    GraspScene {
        body_model: model,
        gt_pose: pose,
        gt_body,
        camera,
        object,
        gt_object_pose,
        gt_object,
        contacts,
        object_mask,
        human_mask,
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

impl GraspScene {
    /// Seeded initialization: the left elbow bent or extended by 0.2 rad
    /// about its hinge axis, the scale 10% small, and the object given in a
    /// frame moved by 10 cm and rotated by 15°.
    pub fn trial(&self, seed: u64) -> GraspTrial {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let elbow = self.body_model.joint_index("leftElbow").expect("humanoid joint");
        let mut init_pose = self.gt_pose.clone();
        let world = joint_transforms(&self.body_model, &self.gt_pose).expect("valid pose");
        let hinge = world[elbow].rotation.inverse() * Vec3::x();
        let bend = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let kick = Rotation3::from_scaled_axis(hinge * bend * ELBOW_PERTURBATION);
        let gt = Rotation3::from_scaled_axis(init_pose.rotations[elbow]);
        init_pose.rotations[elbow] = (gt * kick).scaled_axis();
        let init_scale = self.gt_object_pose.scale * (1.0 - SCALE_PERTURBATION);
        let axis = Unit::new_normalize(random_unit(&mut rng));
        let r = Rotation3::from_axis_angle(&axis, FRAME_ROTATION);
        let t = random_unit(&mut rng) * FRAME_TRANSLATION;
        let object = self.object.map_vertices(|p| r * p + t);
        GraspTrial {
            seed,
            init_pose,
            init_scale,
            object,
        }
    }
}
