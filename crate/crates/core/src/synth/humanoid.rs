use super::box_parts;
use crate::body::{BodyModel, BodySpec};
use crate::mesh::Vec3;

/// Joint names of [`humanoid`], in index order.
pub const HUMANOID_JOINTS: [&str; 17] = [
    "pelvis",
    "spine",
    "chest",
    "neck",
    "head",
    "leftShoulder",
    "leftElbow",
    "leftWrist",
    "rightShoulder",
    "rightElbow",
    "rightWrist",
    "leftHip",
    "leftKnee",
    "leftAnkle",
    "rightHip",
    "rightKnee",
    "rightAnkle",
];

const PARENTS: [Option<usize>; 17] = [
    None,
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(2),
    Some(5),
    Some(6),
    Some(2),
    Some(8),
    Some(9),
    Some(0),
    Some(11),
    Some(12),
    Some(0),
    Some(14),
    Some(15),
];

struct Segment {
    part: &'static str,
    joint: usize,
    center: [f64; 3],
    size: [f64; 3],
    edge: f64,
}

fn seg(part: &'static str, joint: usize, center: [f64; 3], size: [f64; 3], edge: f64) -> Segment {
    Segment {
        part,
        joint,
        center,
        size,
        edge,
    }
}

fn mirror(s: &Segment, part: &'static str, joint: usize) -> Segment {
    seg(part, joint, [-s.center[0], s.center[1], s.center[2]], s.size, s.edge)
}

/// A 1.8 m box-segment humanoid in a T-pose: y up, facing +z, its left
/// side toward +x. Each segment is a closed box rigidly bound to one joint.
pub fn humanoid() -> BodyModel {
    let mut rest = vec![
        Vec3::new(0.0, 0.96, 0.0),
        Vec3::new(0.0, 1.05, 0.0),
        Vec3::new(0.0, 1.26, 0.0),
        Vec3::new(0.0, 1.47, 0.0),
        Vec3::new(0.0, 1.565, 0.0),
        Vec3::new(0.19, 1.42, 0.0),
        Vec3::new(0.48, 1.42, 0.0),
        Vec3::new(0.74, 1.42, 0.0),
    ];
    for j in 5..8 {
        rest.push(Vec3::new(-rest[j].x, rest[j].y, rest[j].z));
    }
    rest.extend([
        Vec3::new(0.1, 0.9, 0.0),
        Vec3::new(0.1, 0.51, 0.0),
        Vec3::new(0.1, 0.09, 0.0),
        Vec3::new(-0.1, 0.9, 0.0),
        Vec3::new(-0.1, 0.51, 0.0),
        Vec3::new(-0.1, 0.09, 0.0),
    ]);

    let upper_arm = seg("leftUpperArm", 5, [0.335, 1.42, 0.0], [0.28, 0.09, 0.09], 0.025);
    let fore_arm = seg("leftForeArm", 6, [0.61, 1.42, 0.0], [0.25, 0.08, 0.08], 0.025);
    let hand = seg("leftHand", 7, [0.83, 1.42, 0.0], [0.17, 0.035, 0.09], 0.012);
    let upper_leg = seg("leftUpperLeg", 11, [0.1, 0.7, 0.0], [0.14, 0.36, 0.15], 0.04);
    let lower_leg = seg("leftLowerLeg", 12, [0.1, 0.3, 0.0], [0.11, 0.4, 0.12], 0.04);
    let foot = seg("leftFootSole", 13, [0.1, 0.04, 0.05], [0.1, 0.08, 0.25], 0.025);
    let segments = vec![
        seg("hips", 0, [0.0, 0.975, 0.0], [0.32, 0.13, 0.2], 0.04),
        seg("torso", 1, [0.0, 1.145, 0.0], [0.3, 0.19, 0.18], 0.04),
        seg("torso", 2, [0.0, 1.36, 0.0], [0.36, 0.21, 0.2], 0.04),
        seg("neck", 3, [0.0, 1.515, 0.0], [0.1, 0.09, 0.1], 0.03),
        seg("head", 4, [0.0, 1.675, 0.01], [0.18, 0.22, 0.2], 0.04),
        mirror(&upper_arm, "rightUpperArm", 8),
        mirror(&fore_arm, "rightForeArm", 9),
        mirror(&hand, "rightHand", 10),
        mirror(&upper_leg, "rightUpperLeg", 14),
        mirror(&lower_leg, "rightLowerLeg", 15),
        mirror(&foot, "rightFootSole", 16),
        upper_arm,
        fore_arm,
        hand,
        upper_leg,
        lower_leg,
        foot,
    ];

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut weights = Vec::new();
    let mut vertex_parts = Vec::new();
    for s in &segments {
        let size = Vec3::from(s.size);
        let n = std::array::from_fn(|k| ((s.size[k] / s.edge).round() as usize).max(1));
        let (v, f) = box_parts(Vec3::from(s.center), size, n);
        let offset = vertices.len();
        let sole_y = s.center[1] - s.size[1] / 2.0;
        for p in &v {
            let part = match s.part {
                "leftFootSole" if p.y > sole_y => "topOfLeftFoot",
                "rightFootSole" if p.y > sole_y => "topOfRightFoot",
                other => other,
            };
            vertex_parts.push(part.to_string());
            weights.push(vec![(s.joint, 1.0)]);
        }
        vertices.extend(v);
        faces.extend(f.iter().map(|t| t.map(|i| i + offset)));
    }

    let part_joints = [
        ("hips", 0),
        ("torso", 2),
        ("neck", 3),
        ("head", 4),
        ("leftUpperArm", 5),
        ("leftForeArm", 6),
        ("leftHand", 7),
        ("rightUpperArm", 8),
        ("rightForeArm", 9),
        ("rightHand", 10),
        ("leftUpperLeg", 11),
        ("leftLowerLeg", 12),
        ("leftFootSole", 13),
        ("topOfLeftFoot", 13),
        ("rightUpperLeg", 14),
        ("rightLowerLeg", 15),
        ("rightFootSole", 16),
        ("topOfRightFoot", 16),
    ];
    BodyModel::new(BodySpec {
        vertices,
        faces,
        joint_names: HUMANOID_JOINTS.iter().map(|s| s.to_string()).collect(),
        parents: PARENTS.to_vec(),
        rest_joints: rest,
        weights,
        vertex_parts,
        part_joints: part_joints.iter().map(|(p, j)| (p.to_string(), *j)).collect(),
        torso_joints: vec![0, 1, 2],
    })
    .expect("humanoid is a valid body model")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{kinematic_chain, PART_NAMES};

    #[test]
    fn every_part_is_labeled() {
        let m = humanoid();
        for p in PART_NAMES {
            assert!(!m.part_vertices(p).unwrap().is_empty(), "{p}");
        }
        assert!(m.template().is_closed());
    }

    #[test]
    fn declared_chains() {
        let m = humanoid();
        assert_eq!(kinematic_chain(&m, "leftHand").unwrap().joints, vec![5, 6, 7]);
        assert_eq!(kinematic_chain(&m, "rightFootSole").unwrap().joints, vec![14, 15, 16]);
        assert!(kinematic_chain(&m, "torso").unwrap().is_empty());
        assert!(kinematic_chain(&m, "hips").unwrap().is_empty());
        assert_eq!(kinematic_chain(&m, "head").unwrap().joints, vec![3, 4]);
    }
}
