use contactfit::body::{
    build_sdf, joint_transforms, kinematic_chain, pose_body, query_sdf, BodyError, BodyModel, BodySpec, PoseVector,
    SdfGrid, PART_NAMES,
};
use contactfit::synth;
use contactfit::Vec3;
use nalgebra::{Matrix3, Matrix4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rodrigues(r: &Vec3) -> Matrix3<f64> {
    let th = r.norm();
    if th == 0.0 {
        return Matrix3::identity();
    }
    let k = r / th;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * th.sin() + kx * kx * (1.0 - th.cos())
}

fn homogeneous(r: &Matrix3<f64>, t: &Vec3) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
    m
}

/// Three stacked boxes along x, one per joint, with blended weights at the
/// middle box.
fn toy_chain() -> BodyModel {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut weights = Vec::new();
    for b in 0..3 {
        let m = synth::subdivided_box(
            Vec3::new(0.5 + b as f64 * 1.2, 0.0, 0.0),
            Vec3::new(1.0, 0.3, 0.3),
            [2, 1, 1],
        );
        let off = vertices.len();
        for p in m.vertices() {
            weights.push(if b == 1 {
                let s = (p.x - 1.2).clamp(0.0, 1.0);
                vec![(0, 0.5 * (1.0 - s)), (1, 0.5 + 0.25 * s), (2, 0.25 * s)]
            } else {
                vec![(b, 1.0)]
            });
        }
        vertices.extend_from_slice(m.vertices());
        faces.extend(m.faces().iter().map(|f| f.map(|i| i + off)));
    }
    let n = vertices.len();
    BodyModel::new(BodySpec {
        vertices,
        faces,
        joint_names: vec!["a".into(), "b".into(), "c".into()],
        parents: vec![None, Some(0), Some(1)],
        rest_joints: vec![Vec3::zeros(), Vec3::new(1.1, 0.0, 0.0), Vec3::new(2.3, 0.0, 0.0)],
        weights,
        vertex_parts: vec!["torso".into(); n],
        part_joints: vec![("torso".into(), 0)],
        torso_joints: vec![0],
    })
    .unwrap()
}

fn random_pose(rng: &mut ChaCha8Rng, joints: usize, scale: f64) -> PoseVector {
    let mut r = || {
        Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    };
    PoseVector {
        rotations: (0..joints).map(|_| r() * scale).collect(),
        translation: r(),
    }
}

#[test]
fn toy_chain_matches_matrix_chain() {
    let model = toy_chain();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let pose = random_pose(&mut rng, 3, 1.5);
        let posed = pose_body(&model, &pose).unwrap();
        let rest = model.rest_joints();
        let g0 = homogeneous(&rodrigues(&pose.rotations[0]), &(rest[0] + pose.translation));
        let g1 = g0 * homogeneous(&rodrigues(&pose.rotations[1]), &(rest[1] - rest[0]));
        let g2 = g1 * homogeneous(&rodrigues(&pose.rotations[2]), &(rest[2] - rest[1]));
        let g = [g0, g1, g2];
        for (v, p) in model.template().vertices().iter().enumerate() {
            let mut want = Vec3::zeros();
            for &(j, w) in model.weights(v) {
                let local = p - rest[j];
                let h = g[j] * local.push(1.0);
                want += h.xyz() * w;
            }
            assert!((posed.vertices()[v] - want).norm() < 1e-12);
        }
    }
}

#[test]
fn zero_pose_translates_template() {
    let model = synth::humanoid();
    let mut pose = PoseVector::zeros(model.num_joints());
    let same = pose_body(&model, &pose).unwrap();
    assert_eq!(same.vertices(), model.template().vertices());
    pose.translation = Vec3::new(0.3, -0.2, 1.0);
    let moved = pose_body(&model, &pose).unwrap();
    for (a, b) in moved.vertices().iter().zip(model.template().vertices()) {
        assert!((a - b - pose.translation).norm() < 1e-12);
    }
    assert_eq!(moved.faces(), model.template().faces());
}

#[test]
fn elbow_quarter_turn_is_rigid_about_the_joint() {
    let model = synth::humanoid();
    let elbow = model.joint_index("leftElbow").unwrap();
    let mut pose = PoseVector::zeros(model.num_joints());
    let axis = Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
    pose.rotations[elbow] = axis;
    let posed = pose_body(&model, &pose).unwrap();
    let c = model.rest_joints()[elbow];
    let r = rodrigues(&axis);
    for v in 0..model.template().num_vertices() {
        let p = model.template().vertices()[v];
        let w = model.weights(v);
        if w.len() == 1 && w[0].0 == elbow {
            assert!((posed.vertices()[v] - (c + r * (p - c))).norm() < 1e-12);
        }
        if !w.iter().any(|&(j, _)| model.descends_from(j, elbow)) {
            assert_eq!(posed.vertices()[v], p);
        }
    }
}

#[test]
fn root_rotation_is_equivariant() {
    let model = synth::humanoid();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let mut pose = random_pose(&mut rng, model.num_joints(), 0.5);
        pose.rotations[0] = Vec3::zeros();
        let base = pose_body(&model, &pose).unwrap();
        let spin = Vec3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        pose.rotations[0] = spin;
        let turned = pose_body(&model, &pose).unwrap();
        let root = model.rest_joints()[0] + pose.translation;
        let r = rodrigues(&spin);
        for (a, b) in turned.vertices().iter().zip(base.vertices()) {
            assert!((a - (root + r * (b - root))).norm() < 1e-9);
        }
    }
}

#[test]
fn pose_dimension_is_checked() {
    let model = synth::humanoid();
    assert!(matches!(
        pose_body(&model, &PoseVector::zeros(3)),
        Err(BodyError::DimensionMismatch { expected: 17, got: 3 })
    ));
    let mut pose = PoseVector::zeros(17);
    pose.rotations[4] = Vec3::new(7.0, 0.0, 0.0);
    assert!(matches!(pose_body(&model, &pose), Err(BodyError::InvalidPose(_))));
}

#[test]
fn invalid_models_are_rejected() {
    let cube = synth::unit_cube();
    let spec = BodySpec {
        vertices: cube.vertices().to_vec(),
        faces: cube.faces().to_vec(),
        joint_names: vec!["a".into(), "b".into()],
        parents: vec![None, Some(0)],
        rest_joints: vec![Vec3::zeros(); 2],
        weights: vec![vec![(0, 0.6), (1, 0.3)]; 8],
        vertex_parts: vec!["torso".into(); 8],
        part_joints: vec![],
        torso_joints: vec![0],
    };
    assert!(matches!(BodyModel::new(spec.clone()), Err(BodyError::InvalidModel(_))));
    let mut s = spec.clone();
    s.weights = vec![vec![(0, 0.7), (1, 0.3)]; 8];
    assert!(BodyModel::new(s.clone()).is_ok());
    s.parents = vec![Some(1), None];
    assert!(matches!(BodyModel::new(s.clone()), Err(BodyError::InvalidModel(_))));
    let mut s = spec;
    s.weights = vec![vec![(0, 1.0)]; 8];
    s.vertex_parts[2] = "tail".into();
    assert_eq!(BodyModel::new(s).unwrap_err(), BodyError::UnknownPart("tail".into()));
}

#[test]
fn chains_follow_the_tree() {
    let model = synth::humanoid();
    for part in PART_NAMES {
        let c = kinematic_chain(&model, part).unwrap();
        for w in c.joints.windows(2) {
            assert_eq!(model.parent(w[1]), Some(w[0]));
        }
        if let Some(&first) = c.joints.first() {
            assert!(model.is_torso(model.parent(first).unwrap()));
        }
    }
    assert_eq!(
        kinematic_chain(&model, "tail").unwrap_err(),
        BodyError::UnknownPart("tail".into())
    );
    let names: Vec<&str> = kinematic_chain(&model, "leftHand")
        .unwrap()
        .joints
        .iter()
        .map(|&j| model.joint_names()[j].as_str())
        .collect();
    assert_eq!(names, ["leftShoulder", "leftElbow", "leftWrist"]);
}

#[test]
fn joint_transforms_place_joints() {
    let model = synth::humanoid();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pose = random_pose(&mut rng, 17, 0.4);
    let g = joint_transforms(&model, &pose).unwrap();
    // every joint origin sits at its parent's transform of the rest offset
    for j in 1..17 {
        let p = model.parent(j).unwrap();
        let off = model.rest_joints()[j] - model.rest_joints()[p];
        let want = g[p] * nalgebra::Point3::from(off);
        assert!((g[j].translation.vector - want.coords).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn posed_segments_keep_edge_lengths(seed in 0u64..1000) {
        // rigid weights keep every edge length
        let model = synth::humanoid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pose = random_pose(&mut rng, 17, 1.0);
        let posed = pose_body(&model, &pose).unwrap();
        for e in model.template().edges().iter().step_by(7) {
            let a = (model.template().vertices()[e[0]] - model.template().vertices()[e[1]]).norm();
            let b = (posed.vertices()[e[0]] - posed.vertices()[e[1]]).norm();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn cube_sdf_values() {
    let g = build_sdf(&synth::unit_cube(), 0.1, 1.1).unwrap();
    assert!((query_sdf(&g, &Vec3::zeros()) + 0.5).abs() <= 0.1);
    assert!((query_sdf(&g, &Vec3::new(0.0, 1.5, 0.0)) - 1.0).abs() <= 0.1);
    assert!(g.values.iter().all(|v| v.is_finite()));
}

#[test]
fn sphere_sdf_matches_analytic() {
    let r = 0.5;
    let sphere = synth::icosphere(4, r);
    let voxel = 0.05;
    let g = build_sdf(&sphere, voxel, 0.1).unwrap();
    for k in 0..g.dims[2] {
        for j in 0..g.dims[1] {
            for i in 0..g.dims[0] {
                let want = g.node(i, j, k).norm() - r;
                assert!((g.value(i, j, k) - want).abs() <= voxel, "{i} {j} {k}");
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let p = Vec3::new(
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
        );
        assert!((query_sdf(&g, &p) - (p.norm() - r)).abs() <= 1.5 * voxel);
    }
}

#[test]
fn trilinear_identities() {
    let dims = [4, 3, 5];
    let mut values = Vec::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                values.push(0.3 * i as f64 - 0.7 * j as f64 + 0.1 * k as f64 + 0.05);
            }
        }
    }
    let g = SdfGrid {
        origin: Vec3::new(-1.0, 0.5, 2.0),
        voxel: 0.25,
        dims,
        values,
        max_boundary: 1.0,
    };
    let center = g.node(1, 1, 2) + Vec3::repeat(0.125);
    let mut mean = 0.0;
    for c in 0..8 {
        mean += g.value(1 + (c & 1), 1 + ((c >> 1) & 1), 2 + ((c >> 2) & 1));
    }
    assert!((query_sdf(&g, &center) - mean / 8.0).abs() < 1e-12);
    assert_eq!(query_sdf(&g, &g.node(3, 2, 4)), g.value(3, 2, 4));
}

/// Crossing count of a ray with every face; Möller–Trumbore.
fn ray_parity_inside(mesh: &contactfit::SurfaceMesh, p: &Vec3, dir: &Vec3) -> bool {
    let mut hits = 0;
    for f in 0..mesh.num_faces() {
        let [a, b, c] = mesh.face_positions(f);
        let e1 = b - a;
        let e2 = c - a;
        let h = dir.cross(&e2);
        let det = e1.dot(&h);
        if det.abs() < 1e-14 {
            continue;
        }
        let s = p - a;
        let u = s.dot(&h) / det;
        let q = s.cross(&e1);
        let v = dir.dot(&q) / det;
        let t = e2.dot(&q) / det;
        if u >= 0.0 && v >= 0.0 && u + v <= 1.0 && t > 0.0 {
            hits += 1;
        }
    }
    hits % 2 == 1
}

#[test]
fn sdf_sign_matches_ray_parity_on_the_humanoid() {
    let model = synth::humanoid();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pose = random_pose(&mut rng, 17, 0.3);
    let body = pose_body(&model, &pose).unwrap();
    let g = build_sdf(&body, 0.02, 0.1).unwrap();
    let (lo, hi) = body.bounding_box();
    let dir = Vec3::new(0.3127, 0.8211, 0.4771).normalize();
    let mut checked = 0;
    let mut inside = 0;
    while checked < 1000 {
        // alternate between the whole box and the neighborhood of a vertex
        let p = if checked % 2 == 0 {
            Vec3::new(
                rng.random_range(lo.x..hi.x),
                rng.random_range(lo.y..hi.y),
                rng.random_range(lo.z..hi.z),
            )
        } else {
            let v = body.vertices()[rng.random_range(0..body.num_vertices())];
            v + Vec3::new(
                rng.random_range(-0.12..0.12),
                rng.random_range(-0.12..0.12),
                rng.random_range(-0.12..0.12),
            )
        };
        let (_, dist) = body.closest_point(&p);
        // interpolation blurs the sign within a voxel of the surface
        if dist < 0.04 {
            continue;
        }
        let want = ray_parity_inside(&body, &p, &dir);
        assert_eq!(query_sdf(&g, &p) < 0.0, want, "at {p:?}");
        inside += want as usize;
        checked += 1;
    }
    // stored node signs, no interpolation
    for _ in 0..1000 {
        let (i, j, k) = (
            rng.random_range(0..g.dims[0]),
            rng.random_range(0..g.dims[1]),
            rng.random_range(0..g.dims[2]),
        );
        let p = g.node(i, j, k);
        if body.closest_point(&p).1 < 1e-9 {
            continue;
        }
        assert_eq!(
            g.value(i, j, k) < 0.0,
            ray_parity_inside(&body, &p, &dir),
            "node {i} {j} {k}"
        );
    }
    assert!(inside > 20, "{inside}");
}
