use std::collections::BTreeSet;
use std::time::Instant;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::adam::{minimize, Minimized, StopRule};
use super::camera::Camera;
use super::loss::{contact_gradient, penetration_gradient};
use super::raster::{loss_mask, rasterize_faces, rasterize_silhouette, SilhouetteMask};
use super::rotation::axis_angle;
use super::{center_mesh, FitConfig, FitError, RigidPose};
use crate::align::{centered_rank, umeyama};
use crate::body::{
    build_sdf, kinematic_chain, pose_body, query_sdf, skin_vertices, skinning_transforms, BodyModel, ChainSpec,
    PoseVector, SdfGrid, SkinTransform,
};
use crate::contact::CorrespondenceSet;
use crate::mesh::{SurfaceMesh, Vec3};

/// Everything a fit consumes.
#[derive(Debug, Clone)]
pub struct FitInputs<'a> {
    pub body_model: &'a BodyModel,
    /// Initial body pose θ*.
    pub init_pose: PoseVector,
    pub camera: Camera,
    /// Object mesh in its own frame. It is centered at its vertex centroid
    /// before fitting.
    pub object: &'a SurfaceMesh,
    /// Initial object scale s*.
    pub init_scale: f64,
    pub correspondences: &'a CorrespondenceSet,
    pub object_mask: &'a SilhouetteMask,
    pub human_mask: &'a SilhouetteMask,
}

/// Validated, preprocessed fit inputs.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub inputs: FitInputs<'a>,
    pub object: SurfaceMesh,
    pub centroid: Vec3,
    pub init_body: SurfaceMesh,
    pub body_vertices: Vec<usize>,
    /// Corresponding points in the centered object frame.
    pub object_points: Vec<Vec3>,
    /// Body vertices of correspondences that failed validation.
    pub dropped: Vec<usize>,
}

impl<'a> Problem<'a> {
    pub fn new(inputs: FitInputs<'a>) -> Result<Self, FitError> {
        inputs.camera.validate()?;
        if !(inputs.init_scale > 0.0) {
            return Err(FitError::InvalidInput("initial scale must be positive".into()));
        }
        for m in [inputs.object_mask, inputs.human_mask] {
            if m.width != inputs.camera.width || m.height != inputs.camera.height {
                return Err(FitError::DimensionMismatch("mask size differs from the camera".into()));
            }
        }
        let init_body = pose_body(inputs.body_model, &inputs.init_pose)?;
        let (object, centroid) = center_mesh(inputs.object);
        let mut body_vertices = Vec::new();
        let mut object_points = Vec::new();
        let mut dropped = Vec::new();
        for c in &inputs.correspondences.pairs {
            let ok = c.body_vertex < init_body.num_vertices() && object.validate_point(&c.object_point).is_ok();
            if ok {
                body_vertices.push(c.body_vertex);
                object_points.push(object.position(&c.object_point));
            } else {
                dropped.push(c.body_vertex);
            }
        }
        if body_vertices.is_empty() {
            return Err(FitError::EmptyCorrespondences);
        }
        Ok(Self {
            inputs,
            object,
            centroid,
            init_body,
            body_vertices,
            object_points,
            dropped,
        })
    }

    fn targets(&self, body: &SurfaceMesh) -> Vec<Vec3> {
        self.body_vertices.iter().map(|&v| body.vertices()[v]).collect()
    }

    /// The object mesh posed by `pose` in camera space.
    pub fn posed_object(&self, pose: &RigidPose) -> SurfaceMesh {
        self.object.map_vertices(|p| pose.apply(p))
    }
}

/// Optimizer coordinates for an object pose: rotation, then translation and
/// scale in units of the initial scale `s0`.
fn to_units(params: &[f64], s0: f64) -> Vec<f64> {
    params
        .iter()
        .enumerate()
        .map(|(i, &v)| if i < 3 { v } else { v / s0 })
        .collect()
}

fn from_units(units: &[f64], s0: f64) -> Vec<f64> {
    units
        .iter()
        .enumerate()
        .map(|(i, &v)| if i < 3 { v } else { v * s0 })
        .collect()
}

fn stop_rule(config: &FitConfig) -> StopRule {
    StopRule {
        iterations: config.iterations,
        tolerance: config.tolerance,
        window: config.window,
    }
}

/// Rigid alignment of the object to the body through correspondences, with
/// the scale held at s*. A closed-form least-squares fit initializes Adam on
/// the mean (unsquared) contact distance.
pub fn stage1_register(problem: &Problem, config: &FitConfig) -> Result<(RigidPose, Minimized), FitError> {
    let rank = centered_rank(&problem.object_points);
    if problem.object_points.len() < 3 || rank < 2 {
        return Err(FitError::DegenerateCorrespondences(rank));
    }
    let s = problem.inputs.init_scale;
    let targets = problem.targets(&problem.init_body);
    let scaled: Vec<Vec3> = problem.object_points.iter().map(|p| p * s).collect();
    let init = umeyama(&scaled, &targets, false).map_err(|_| FitError::DegenerateCorrespondences(rank))?;
    let start = RigidPose {
        rotation: axis_angle(&init.rotation),
        translation: init.translation,
        scale: s,
    };
    let lr = config.learning_rates;
    let rates = vec![
        lr.rotation,
        lr.rotation,
        lr.rotation,
        lr.translation,
        lr.translation,
        lr.translation,
    ];
    let x0 = to_units(&start.params()[..6], s);
    let mut result = minimize(&x0, rates, stop_rule(config), |_, u| {
        let x = from_units(u, s);
        let pose = RigidPose {
            rotation: Vec3::new(x[0], x[1], x[2]),
            translation: Vec3::new(x[3], x[4], x[5]),
            scale: s,
        };
        let (v, g) = contact_gradient(&targets, &problem.object_points, &pose);
        Ok((v, to_units(&g[..6], 1.0 / s)))
    })?;
    result.params = from_units(&result.params, s);
    let mut p = result.params.clone();
    p.push(s);
    Ok((RigidPose::from_params(&p), result))
}

/// Breakdown of the stage-2 objective at one pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage2Terms {
    pub contact: f64,
    pub penetration: f64,
    pub mask: f64,
    pub scale: f64,
}

struct Stage2<'p, 'a> {
    problem: &'p Problem<'a>,
    config: &'p FitConfig,
    targets: Vec<Vec3>,
    sdf: SdfGrid,
}

impl Stage2<'_, '_> {
    fn mask_loss(&self, x: &[f64]) -> Result<f64, FitError> {
        let pose = RigidPose::from_params(x);
        let m = rasterize_silhouette(&self.problem.object, &pose, &self.problem.inputs.camera)?;
        loss_mask(&m, self.problem.inputs.object_mask)
    }

    fn terms(&self, pose: &RigidPose) -> Result<(Stage2Terms, [f64; 7], [f64; 7]), FitError> {
        let (lc, gc) = contact_gradient(&self.targets, &self.problem.object_points, pose);
        let (lp, gp) = penetration_gradient(&self.sdf, self.problem.object.vertices(), pose);
        let mask = self.mask_loss(&pose.params())?;
        let terms = Stage2Terms {
            contact: lc,
            penetration: lp,
            mask,
            scale: (pose.scale - self.problem.inputs.init_scale).abs(),
        };
        Ok((terms, gc, gp))
    }

    fn total(&self, t: &Stage2Terms) -> f64 {
        let w = self.config.stage2;
        w.contact * t.contact + w.penetration * t.penetration + w.mask * t.mask + w.prior * t.scale
    }

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>), FitError> {
        let w = self.config.stage2;
        let fd = self.config.fd;
        let pose = RigidPose::from_params(x);
        if !(pose.scale > 0.0) {
            return Err(FitError::NonFiniteLoss);
        }
        let (terms, gc, gp) = self.terms(&pose)?;
        let mut grad = vec![0.0; 7];
        for i in 0..7 {
            let h = match i {
                0..=2 => fd.rotation,
                3..=5 => fd.translation,
                _ => fd.scale * pose.scale,
            };
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += h;
            lo[i] -= h;
            let gm = (self.mask_loss(&hi)? - self.mask_loss(&lo)?) / (2.0 * h);
            grad[i] = w.contact * gc[i] + w.penetration * gp[i] + w.mask * gm;
        }
        let ds = pose.scale - self.problem.inputs.init_scale;
        if ds != 0.0 {
            grad[6] += w.prior * ds.signum();
        }
        Ok((self.total(&terms), grad))
    }
}

/// Refines rotation, translation and scale against the object silhouette,
/// contact and penetration, with the body fixed.
pub fn stage2_refine(
    problem: &Problem,
    init: &RigidPose,
    config: &FitConfig,
) -> Result<(RigidPose, Minimized), FitError> {
    init.validate()?;
    let sdf = build_sdf(&problem.init_body, config.voxel, config.padding)?;
    let stage = Stage2 {
        problem,
        config,
        targets: problem.targets(&problem.init_body),
        sdf,
    };
    let lr = config.learning_rates;
    let rates = vec![
        lr.rotation,
        lr.rotation,
        lr.rotation,
        lr.translation,
        lr.translation,
        lr.translation,
        lr.scale,
    ];
    let s0 = problem.inputs.init_scale;
    let mut result = minimize(&to_units(&init.params(), s0), rates, stop_rule(config), |_, u| {
        let (loss, grad) = stage.evaluate(&from_units(u, s0))?;
        Ok((loss, to_units(&grad, 1.0 / s0)))
    })?;
    result.params = from_units(&result.params, s0);
    Ok((RigidPose::from_params(&result.params), result))
}

/// Stage-2 loss terms of `pose`, against the initial body.
pub fn stage2_terms(problem: &Problem, pose: &RigidPose, config: &FitConfig) -> Result<Stage2Terms, FitError> {
    let stage = Stage2 {
        problem,
        config,
        targets: problem.targets(&problem.init_body),
        sdf: build_sdf(&problem.init_body, config.voxel, config.padding)?,
    };
    Ok(stage.terms(pose)?.0)
}

struct Stage3<'p, 'a> {
    problem: &'p Problem<'a>,
    config: &'p FitConfig,
    joints: Vec<usize>,
    theta0: PoseVector,
    x0: Vec<f64>,
    moving: Vec<usize>,
    moving_faces: Vec<[usize; 3]>,
    static_mask: SilhouetteMask,
    object_vertices: Vec<Vec3>,
    contact_targets: Vec<Vec3>,
}

/// Affine form `x ↦ M·x + c` of a vertex's blended skinning transform.
fn vertex_frame(model: &BodyModel, transforms: &[SkinTransform], v: usize) -> (Matrix3<f64>, Vec3) {
    let mut m = Matrix3::zeros();
    let mut c = Vec3::zeros();
    for &(j, w) in model.weights(v) {
        let t = &transforms[j];
        m += t.rotation * w;
        c += (t.rest - t.rotation * t.rest + t.delta) * w;
    }
    (m, c)
}

/// Body SDF built at one pose. Between rebuilds each object vertex is
/// carried into the build pose by the skinning frame of its nearest body
/// vertex, so the penetration term follows the moving limbs.
struct PoseSdf {
    sdf: SdfGrid,
    anchors: Vec<usize>,
    frames: Vec<(Matrix3<f64>, Vec3)>,
}

impl PoseSdf {
    fn build(model: &BodyModel, theta: &PoseVector, object: &[Vec3], config: &FitConfig) -> Result<Self, FitError> {
        let body = pose_body(model, theta)?;
        let sdf = build_sdf(&body, config.voxel, config.padding)?;
        let a = skinning_transforms(model, theta)?;
        let anchors: Vec<usize> = object.iter().map(|p| body.nearest_vertex(p)).collect();
        let frames = anchors.iter().map(|&b| vertex_frame(model, &a, b)).collect();
        Ok(Self { sdf, anchors, frames })
    }

    fn penetration(&self, model: &BodyModel, transforms: &[SkinTransform], object: &[Vec3]) -> f64 {
        let mut sum = 0.0;
        for ((p, &b), (mk, ck)) in object.iter().zip(&self.anchors).zip(&self.frames) {
            let (m, c) = vertex_frame(model, transforms, b);
            let local = m.try_inverse().map_or(*p, |inv| inv * (p - c));
            sum -= query_sdf(&self.sdf, &(mk * local + ck)).min(0.0);
        }
        sum
    }
}

impl Stage3<'_, '_> {
    fn theta(&self, x: &[f64]) -> PoseVector {
        let mut t = self.theta0.clone();
        for (k, &j) in self.joints.iter().enumerate() {
            t.rotations[j] = Vec3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
        }
        t
    }

    /// Contact and penetration terms at `x`.
    fn smooth_terms(&self, x: &[f64], sdf: &PoseSdf) -> Result<(f64, f64), FitError> {
        let model = self.problem.inputs.body_model;
        let a = skinning_transforms(model, &self.theta(x))?;
        let v = skin_vertices(model, &a, &self.problem.body_vertices);
        let sum: f64 = v.iter().zip(&self.contact_targets).map(|(a, b)| (a - b).norm()).sum();
        let lp = sdf.penetration(model, &a, &self.object_vertices);
        Ok((sum / v.len() as f64, lp))
    }

    fn mask(&self, x: &[f64]) -> Result<f64, FitError> {
        let model = self.problem.inputs.body_model;
        let a = skinning_transforms(model, &self.theta(x))?;
        let moved = skin_vertices(model, &a, &self.moving);
        let mut positions = vec![Vec3::zeros(); model.template().num_vertices()];
        for (&v, p) in self.moving.iter().zip(moved) {
            positions[v] = p;
        }
        let mut m = self.static_mask.clone();
        rasterize_faces(&self.problem.inputs.camera, &positions, &self.moving_faces, &mut m);
        loss_mask(&m, self.problem.inputs.human_mask)
    }

    fn prior(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d: Vec<f64> = x.iter().zip(&self.x0).map(|(a, b)| a - b).collect();
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return (0.0, vec![0.0; x.len()]);
        }
        (n, d.iter().map(|v| v / n).collect())
    }

    fn evaluate(&self, x: &[f64], sdf: &PoseSdf) -> Result<(f64, Vec<f64>), FitError> {
        let w = self.config.stage3;
        let fd = self.config.fd;
        let (lc, lp) = self.smooth_terms(x, sdf)?;
        let lm = self.mask(x)?;
        let (lr, gr) = self.prior(x);
        let mut grad = vec![0.0; x.len()];
        for i in 0..x.len() {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += fd.smooth;
            lo[i] -= fd.smooth;
            let (ch, ph) = self.smooth_terms(&hi, sdf)?;
            let (cl, pl) = self.smooth_terms(&lo, sdf)?;
            let smooth = (w.contact * (ch - cl) + w.penetration * (ph - pl)) / (2.0 * fd.smooth);
            hi[i] = x[i] + fd.joint;
            lo[i] = x[i] - fd.joint;
            let gm = (self.mask(&hi)? - self.mask(&lo)?) / (2.0 * fd.joint);
            grad[i] = smooth + w.mask * gm + w.prior * gr[i];
        }
        Ok((w.contact * lc + w.penetration * lp + w.mask * lm + w.prior * lr, grad))
    }
}

/// Refines the joint rotations of every chain against contact, penetration,
/// the human silhouette and a prior on θ*. The body SDF is rebuilt every
/// `config.sdf_rebuild` iterations.
pub fn stage3_refine(
    problem: &Problem,
    object_pose: &RigidPose,
    theta: &PoseVector,
    chains: &[ChainSpec],
    config: &FitConfig,
) -> Result<(PoseVector, Minimized), FitError> {
    let joints: Vec<usize> = chains
        .iter()
        .flat_map(|c| c.joints.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if joints.is_empty() {
        return Err(FitError::EmptyChains);
    }
    let model = problem.inputs.body_model;
    let nv = model.template().num_vertices();
    let is_moving: Vec<bool> = (0..nv)
        .map(|v| {
            model
                .weights(v)
                .iter()
                .any(|&(j, _)| joints.iter().any(|&c| model.descends_from(j, c)))
        })
        .collect();
    let moving: Vec<usize> = (0..nv).filter(|&v| is_moving[v]).collect();
    let (moving_faces, static_faces): (Vec<[usize; 3]>, Vec<[usize; 3]>) = model
        .template()
        .faces()
        .iter()
        .partition(|f| f.iter().any(|&v| is_moving[v]));
    let body = pose_body(model, theta)?;
    let camera = &problem.inputs.camera;
    let mut static_mask = SilhouetteMask::new(camera.width, camera.height);
    rasterize_faces(camera, body.vertices(), &static_faces, &mut static_mask);
    let x0: Vec<f64> = joints
        .iter()
        .flat_map(|&j| theta.rotations[j].iter().copied().collect::<Vec<_>>())
        .collect();
    let stage = Stage3 {
        problem,
        config,
        joints: joints.clone(),
        theta0: theta.clone(),
        x0: x0.clone(),
        moving,
        moving_faces,
        static_mask,
        object_vertices: problem.object.vertices().iter().map(|p| object_pose.apply(p)).collect(),
        contact_targets: problem.object_points.iter().map(|p| object_pose.apply(p)).collect(),
    };
    let rates = vec![config.learning_rates.joint; x0.len()];
    let mut sdf = PoseSdf::build(model, theta, &stage.object_vertices, config)?;
    let result = minimize(&x0, rates, stop_rule(config), |it, x| {
        if it > 0 && it % config.sdf_rebuild == 0 {
            sdf = PoseSdf::build(model, &stage.theta(x), &stage.object_vertices, config)?;
        }
        stage.evaluate(x, &sdf)
    })?;
    Ok((stage.theta(&result.params), result))
}

/// Outcome of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub loss: f64,
    pub trace: Vec<f64>,
    pub object_pose: RigidPose,
    pub theta: PoseVector,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Maps the centered object (`p − object_centroid`) into camera space.
    pub object_pose: RigidPose,
    pub object_centroid: Vec3,
    pub theta: PoseVector,
    pub stages: Vec<StageReport>,
    pub chains: Vec<ChainSpec>,
    /// Set when no contacting limb was found and θ was left unchanged.
    pub empty_chains: bool,
    pub dropped_correspondences: Vec<usize>,
}

impl FitResult {
    /// The input object mesh placed by `pose`.
    pub fn place_object(&self, object: &SurfaceMesh, pose: &RigidPose) -> SurfaceMesh {
        object.map_vertices(|p| pose.apply(&(p - self.object_centroid)))
    }

    pub fn object_mesh(&self, object: &SurfaceMesh) -> SurfaceMesh {
        self.place_object(object, &self.object_pose)
    }

    /// Copy with timings zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for s in &mut r.stages {
            s.seconds = 0.0;
        }
        r
    }
}

fn in_stage<T>(stage: usize, r: Result<T, FitError>) -> Result<T, FitError> {
    r.map_err(|e| FitError::Stage {
        stage,
        error: Box::new(e),
    })
}

/// Chains of every part touched by a correspondence, deduplicated.
pub fn contact_chains(model: &BodyModel, body_vertices: &[usize]) -> Result<Vec<ChainSpec>, FitError> {
    let parts: BTreeSet<&str> = body_vertices.iter().map(|&v| model.vertex_part(v)).collect();
    let mut chains: Vec<ChainSpec> = Vec::new();
    for p in parts {
        let c = kinematic_chain(model, p)?;
        if !c.is_empty() && !chains.iter().any(|o| o.joints == c.joints) {
            chains.push(c);
        }
    }
    Ok(chains)
}

/// Runs stages 1 to `config.stages` in order.
pub fn fit(inputs: FitInputs, config: &FitConfig) -> Result<FitResult, FitError> {
    config.validate()?;
    let problem = Problem::new(inputs)?;
    let theta0 = problem.inputs.init_pose.clone();
    let mut stages = Vec::new();

    let clock = Instant::now();
    let (mut pose, m1) = in_stage(1, stage1_register(&problem, config))?;
    stages.push(StageReport {
        stage: 1,
        loss: m1.loss,
        trace: m1.trace,
        object_pose: pose,
        theta: theta0.clone(),
        seconds: clock.elapsed().as_secs_f64(),
    });

    if config.stages >= 2 {
        let clock = Instant::now();
        let (p, m2) = in_stage(2, stage2_refine(&problem, &pose, config))?;
        pose = p;
        stages.push(StageReport {
            stage: 2,
            loss: m2.loss,
            trace: m2.trace,
            object_pose: pose,
            theta: theta0.clone(),
            seconds: clock.elapsed().as_secs_f64(),
        });
    }

    let mut theta = theta0.clone();
    let mut chains = Vec::new();
    let mut empty_chains = false;
    if config.stages >= 3 {
        let clock = Instant::now();
        chains = in_stage(3, contact_chains(problem.inputs.body_model, &problem.body_vertices))?;
        match stage3_refine(&problem, &pose, &theta0, &chains, config) {
            Ok((t, m3)) => {
                theta = t;
                stages.push(StageReport {
                    stage: 3,
                    loss: m3.loss,
                    trace: m3.trace,
                    object_pose: pose,
                    theta: theta.clone(),
                    seconds: clock.elapsed().as_secs_f64(),
                });
            }
            Err(FitError::EmptyChains) => empty_chains = true,
            Err(e) => return in_stage(3, Err(e)),
        }
    }

    Ok(FitResult {
        object_pose: pose,
        object_centroid: problem.centroid,
        theta,
        stages,
        chains,
        empty_chains,
        dropped_correspondences: problem.dropped,
    })
}
