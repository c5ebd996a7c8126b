//! Articulated, linear-blend-skinned body model.
//!
//! Joints form a tree rooted at joint 0 with parents listed before children.
//! Each joint carries an axis-angle rotation relative to its parent; the root
//! also carries the global translation. Posing maps every template vertex
//! through the weighted sum of its joints' rest-to-posed transforms.

mod chain;
mod sdf;

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{MeshError, SurfaceMesh, Vec3};

pub use chain::{kinematic_chain, ChainSpec};
pub use sdf::{build_sdf, query_sdf, query_sdf_gradient, SdfGrid, DEFAULT_PADDING, DEFAULT_VOXEL};

/// Body part vocabulary.
pub const PART_NAMES: [&str; 18] = [
    "head",
    "neck",
    "torso",
    "hips",
    "leftUpperArm",
    "rightUpperArm",
    "leftForeArm",
    "rightForeArm",
    "leftHand",
    "rightHand",
    "leftUpperLeg",
    "rightUpperLeg",
    "leftLowerLeg",
    "rightLowerLeg",
    "leftFootSole",
    "rightFootSole",
    "topOfLeftFoot",
    "topOfRightFoot",
];

/// Index of `name` in [`PART_NAMES`].
pub fn part_index(name: &str) -> Option<usize> {
    PART_NAMES.iter().position(|p| *p == name)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BodyError {
    #[error("pose has {got} joints, model has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown body part {0:?}")]
    UnknownPart(String),
    #[error("mesh is not closed")]
    OpenMesh,
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid body model: {0}")]
    InvalidModel(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Joint tree, skinning weights and part labels over a template mesh.
#[derive(Debug, Clone)]
pub struct BodyModel {
    template: SurfaceMesh,
    joint_names: Vec<String>,
    parents: Vec<Option<usize>>,
    rest_joints: Vec<Vec3>,
    weights: Vec<Vec<(usize, f64)>>,
    vertex_parts: Vec<usize>,
    part_joints: Vec<Option<usize>>,
    torso: Vec<bool>,
}

/// Plain-data description of a [`BodyModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub joint_names: Vec<String>,
    /// `None` for the root.
    pub parents: Vec<Option<usize>>,
    pub rest_joints: Vec<Vec3>,
    /// Sparse `(joint, weight)` lists per vertex.
    pub weights: Vec<Vec<(usize, f64)>>,
    /// Part name per vertex.
    pub vertex_parts: Vec<String>,
    /// Joint driving each part, keyed by part name.
    pub part_joints: Vec<(String, usize)>,
    /// Joints belonging to the torso. Chains stop below them.
    pub torso_joints: Vec<usize>,
}

pub const MAX_INFLUENCES: usize = 8;

impl BodyModel {
    pub fn new(spec: BodySpec) -> Result<Self, BodyError> {
        let bad = |m: String| Err(BodyError::InvalidModel(m));
        let nj = spec.parents.len();
        if nj == 0 {
            return bad("no joints".into());
        }
        if spec.joint_names.len() != nj || spec.rest_joints.len() != nj {
            return bad("joint arrays differ in length".into());
        }
        if spec.parents[0].is_some() {
            return bad("joint 0 must be the root".into());
        }
        for (j, p) in spec.parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < j => {}
                _ => return bad(format!("joint {j} needs a parent with a smaller index")),
            }
        }
        let template = SurfaceMesh::new(spec.vertices, spec.faces)?;
        let nv = template.num_vertices();
        if spec.weights.len() != nv || spec.vertex_parts.len() != nv {
            return bad("per-vertex arrays differ from the vertex count".into());
        }
        for (v, w) in spec.weights.iter().enumerate() {
            if w.is_empty() || w.len() > MAX_INFLUENCES {
                return bad(format!("vertex {v} has {} influences", w.len()));
            }
            let mut sum = 0.0;
            for &(j, x) in w {
                if j >= nj || !(x >= 0.0) {
                    return bad(format!("vertex {v} has an invalid weight"));
                }
                sum += x;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return bad(format!("weights of vertex {v} sum to {sum}"));
            }
        }
        let mut vertex_parts = Vec::with_capacity(nv);
        for name in &spec.vertex_parts {
            vertex_parts.push(part_index(name).ok_or_else(|| BodyError::UnknownPart(name.clone()))?);
        }
        let mut part_joints = vec![None; PART_NAMES.len()];
        for (name, j) in &spec.part_joints {
            let p = part_index(name).ok_or_else(|| BodyError::UnknownPart(name.clone()))?;
            if *j >= nj {
                return bad(format!("part {name} maps to missing joint {j}"));
            }
            part_joints[p] = Some(*j);
        }
        let mut torso = vec![false; nj];
        for &j in &spec.torso_joints {
            if j >= nj {
                return bad(format!("torso joint {j} out of range"));
            }
            torso[j] = true;
        }
        Ok(Self {
            template,
            joint_names: spec.joint_names,
            parents: spec.parents,
            rest_joints: spec.rest_joints,
            weights: spec.weights,
            vertex_parts,
            part_joints,
            torso,
        })
    }

    pub fn to_spec(&self) -> BodySpec {
        BodySpec {
            vertices: self.template.vertices().to_vec(),
            faces: self.template.faces().to_vec(),
            joint_names: self.joint_names.clone(),
            parents: self.parents.clone(),
            rest_joints: self.rest_joints.clone(),
            weights: self.weights.clone(),
            vertex_parts: self.vertex_parts.iter().map(|&p| PART_NAMES[p].to_string()).collect(),
            part_joints: self
                .part_joints
                .iter()
                .enumerate()
                .filter_map(|(p, j)| j.map(|j| (PART_NAMES[p].to_string(), j)))
                .collect(),
            torso_joints: (0..self.num_joints()).filter(|&j| self.torso[j]).collect(),
        }
    }

    pub fn template(&self) -> &SurfaceMesh {
        &self.template
    }

    pub fn num_joints(&self) -> usize {
        self.parents.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn rest_joints(&self) -> &[Vec3] {
        &self.rest_joints
    }

    pub fn weights(&self, vertex: usize) -> &[(usize, f64)] {
        &self.weights[vertex]
    }

    pub fn is_torso(&self, joint: usize) -> bool {
        self.torso[joint]
    }

    /// Part name of a vertex.
    pub fn vertex_part(&self, vertex: usize) -> &'static str {
        PART_NAMES[self.vertex_parts[vertex]]
    }

    /// Vertices labeled with `part`, ascending.
    pub fn part_vertices(&self, part: &str) -> Result<Vec<usize>, BodyError> {
        let p = part_index(part).ok_or_else(|| BodyError::UnknownPart(part.to_string()))?;
        Ok((0..self.vertex_parts.len())
            .filter(|&v| self.vertex_parts[v] == p)
            .collect())
    }

    pub fn part_joint(&self, part: &str) -> Result<Option<usize>, BodyError> {
        let p = part_index(part).ok_or_else(|| BodyError::UnknownPart(part.to_string()))?;
        Ok(self.part_joints[p])
    }

    /// Whether `joint` is `ancestor` or lies below it.
    pub fn descends_from(&self, mut joint: usize, ancestor: usize) -> bool {
        loop {
            if joint == ancestor {
                return true;
            }
            match self.parents[joint] {
                Some(p) => joint = p,
                None => return false,
            }
        }
    }
}

/// Per-joint axis-angle rotations and a root translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseVector {
    pub rotations: Vec<Vec3>,
    pub translation: Vec3,
}

impl PoseVector {
    pub fn zeros(joints: usize) -> Self {
        Self {
            rotations: vec![Vec3::zeros(); joints],
            translation: Vec3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), BodyError> {
        for (j, r) in self.rotations.iter().enumerate() {
            if !r.iter().all(|x| x.is_finite()) || r.norm() >= 2.0 * std::f64::consts::PI {
                return Err(BodyError::InvalidPose(format!("rotation of joint {j}")));
            }
        }
        if !self.translation.iter().all(|x| x.is_finite()) {
            return Err(BodyError::InvalidPose("translation".into()));
        }
        Ok(())
    }
}

/// World transforms of every joint: the root is `T(trans)·T(rest₀)·R₀`,
/// children `G_parent·T(rest_j − rest_parent)·R_j`.
pub fn joint_transforms(model: &BodyModel, pose: &PoseVector) -> Result<Vec<Isometry3<f64>>, BodyError> {
    if pose.rotations.len() != model.num_joints() {
        return Err(BodyError::DimensionMismatch {
            expected: model.num_joints(),
            got: pose.rotations.len(),
        });
    }
    pose.validate()?;
    let rest = &model.rest_joints;
    let mut out: Vec<Isometry3<f64>> = Vec::with_capacity(rest.len());
    for j in 0..rest.len() {
        let local_t = match model.parents[j] {
            None => rest[j] + pose.translation,
            Some(p) => rest[j] - rest[p],
        };
        let local = Isometry3::from_parts(
            Translation3::from(local_t),
            UnitQuaternion::from_scaled_axis(pose.rotations[j]),
        );
        out.push(match model.parents[j] {
            None => local,
            Some(p) => out[p] * local,
        });
    }
    Ok(out)
}

/// Rest-to-posed map of one joint, `p ↦ p + (R − I)(p − rest) + δ`.
/// Written this way the identity pose reproduces the template bit for bit.
#[derive(Debug, Clone, Copy)]
pub struct SkinTransform {
    pub rotation: Matrix3<f64>,
    pub rest: Vec3,
    pub delta: Vec3,
}

impl SkinTransform {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        let rel = p - self.rest;
        p + (self.rotation * rel - rel) + self.delta
    }
}

/// Rest-to-posed transforms `G_j·T(−rest_j)` of every joint.
pub fn skinning_transforms(model: &BodyModel, pose: &PoseVector) -> Result<Vec<SkinTransform>, BodyError> {
    if pose.rotations.len() != model.num_joints() {
        return Err(BodyError::DimensionMismatch {
            expected: model.num_joints(),
            got: pose.rotations.len(),
        });
    }
    pose.validate()?;
    let rest = &model.rest_joints;
    let mut out: Vec<SkinTransform> = Vec::with_capacity(rest.len());
    for j in 0..rest.len() {
        let local = *Rotation3::from_scaled_axis(pose.rotations[j]).matrix();
        let t = match model.parents[j] {
            None => SkinTransform {
                rotation: local,
                rest: rest[j],
                delta: pose.translation,
            },
            Some(p) => {
                let parent = out[p];
                let off = rest[j] - rest[p];
                SkinTransform {
                    rotation: parent.rotation * local,
                    rest: rest[j],
                    delta: parent.delta + (parent.rotation * off - off),
                }
            }
        };
        out.push(t);
    }
    Ok(out)
}

/// Skinned positions of the given template vertices.
pub fn skin_vertices(model: &BodyModel, transforms: &[SkinTransform], vertices: &[usize]) -> Vec<Vec3> {
    let tv = model.template.vertices();
    vertices
        .iter()
        .map(|&v| {
            let w = &model.weights[v];
            if let [(j, _)] = w.as_slice() {
                return transforms[*j].apply(&tv[v]);
            }
            let mut acc = Vec3::zeros();
            for &(j, x) in w {
                acc += transforms[j].apply(&tv[v]) * x;
            }
            acc
        })
        .collect()
}

/// Forward kinematics and linear blend skinning of the full template.
pub fn pose_body(model: &BodyModel, pose: &PoseVector) -> Result<SurfaceMesh, BodyError> {
    let a = skinning_transforms(model, pose)?;
    let all: Vec<usize> = (0..model.template.num_vertices()).collect();
    Ok(model.template.with_vertices(skin_vertices(model, &a, &all))?)
}
