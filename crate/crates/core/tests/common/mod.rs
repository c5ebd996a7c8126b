//! Reference implementations and random inputs shared by the test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::PI;

use contactfit::body::{build_sdf, SdfGrid};
use contactfit::contact::{extract_patches, ContactPatch};
use contactfit::eval::SimilarityTransform;
use contactfit::fit::{penetration_gradient, RigidPose};
use contactfit::retrieval::{EmbeddingRecord, EmbeddingStore};
use contactfit::synth;
use contactfit::{SurfaceMesh, SurfacePoint, Vec3};
use nalgebra::{Matrix3, Matrix4, Rotation3, SymmetricEigen, Unit, UnitQuaternion};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_point(mesh: &SurfaceMesh, rng: &mut ChaCha8Rng) -> SurfacePoint {
    let f = rng.random_range(0..mesh.num_faces());
    let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    SurfacePoint::new(f, [1.0 - u - v, u, v])
}

/// Random surface point within roughly `radius` of `center` on a sphere mesh.
pub fn point_near(mesh: &SurfaceMesh, center: &Vec3, radius: f64, rng: &mut ChaCha8Rng) -> SurfacePoint {
    let c = center.normalize();
    let u = c.cross(&Vec3::new(0.3, 0.5, 0.7)).normalize();
    let w = c.cross(&u);
    let theta = rng.random_range(-PI..PI);
    let r = radius * rng.random::<f64>().sqrt();
    let q = (c + (u * theta.cos() + w * theta.sin()) * r.tan()).normalize();
    mesh.closest_point(&q).0
}

pub fn great_circle(a: &Vec3, b: &Vec3) -> f64 {
    a.normalize().dot(&b.normalize()).clamp(-1.0, 1.0).acos()
}

pub fn elliptic_patch(m: &SurfaceMesh, center: Vec3, a: f64, b: f64) -> ContactPatch {
    let c = center.normalize();
    let u = c.cross(&Vec3::new(0.2, 0.3, 0.9)).normalize();
    let w = c.cross(&u);
    let set: BTreeSet<usize> = (0..m.num_vertices())
        .filter(|&v| {
            let p = m.vertices()[v];
            p.dot(&c) > 0.0 && (p.dot(&u) / a).powi(2) + (p.dot(&w) / b).powi(2) <= 1.0
        })
        .collect();
    let mut patches = extract_patches(m, &set).unwrap();
    patches.sort_by_key(|p| std::cmp::Reverse(p.vertices.len()));
    patches.remove(0)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return v.normalize();
        }
    }
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> RigidPose {
    RigidPose {
        rotation: random_unit(rng) * rng.random_range(0.0..3.0),
        translation: Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ),
        scale: rng.random_range(0.5..2.0),
    }
}

pub fn relative_gap(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-8);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Within a finite-difference step of a cell face of the trilinear
/// interpolant, or of the surface where −min(·, 0) bends.
pub fn near_kink(sdf: &SdfGrid, q: &Vec3) -> bool {
    let margin = 1e-4;
    let on_face = (0..3).any(|k| {
        let u = (q[k] - sdf.origin[k]) / sdf.voxel;
        (u - u.round()).abs() * sdf.voxel < margin
    });
    on_face || penetration_gradient(sdf, &[*q], &RigidPose::identity()).0.abs() < margin
}

pub fn central_difference(f: impl Fn(&RigidPose) -> f64, pose: &RigidPose, h: f64) -> Vec<f64> {
    (0..7)
        .map(|i| {
            let mut hi = pose.params();
            let mut lo = pose.params();
            hi[i] += h;
            lo[i] -= h;
            (f(&RigidPose::from_params(&hi)) - f(&RigidPose::from_params(&lo))) / (2.0 * h)
        })
        .collect()
}

pub fn sphere_sdf() -> SdfGrid {
    build_sdf(&synth::icosphere(4, 0.5), 0.02, 0.1).unwrap()
}

pub fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect()
}

pub fn random_similarity(rng: &mut ChaCha8Rng) -> SimilarityTransform {
    let axis = Unit::new_normalize(cloud(rng, 1)[0]);
    SimilarityTransform {
        rotation: *Rotation3::from_axis_angle(&axis, rng.random_range(0.0..3.0)).matrix(),
        translation: cloud(rng, 1)[0] * 2.0,
        scale: rng.random_range(0.5..2.0),
    }
}

pub fn brute_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let directed = |from: &[Vec3], to: &[Vec3]| {
        let mut sum = 0.0;
        for p in from {
            let mut best = f64::INFINITY;
            for q in to {
                best = best.min((p - q).norm());
            }
            sum += best;
        }
        sum / from.len() as f64
    };
    // metres to centimetres, halved
    50.0 * (directed(a, b) + directed(b, a))
}

/// Horn's quaternion method with the scale of the least-squares similarity.
pub fn horn(source: &[Vec3], target: &[Vec3]) -> SimilarityTransform {
    let n = source.len() as f64;
    let cs = source.iter().sum::<Vec3>() / n;
    let ct = target.iter().sum::<Vec3>() / n;
    let mut m = Matrix3::zeros();
    for (x, y) in source.iter().zip(target) {
        m += (x - cs) * (y - ct).transpose();
    }
    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    let k = Matrix4::new(
        sxx + syy + szz,
        syz - szy,
        szx - sxz,
        sxy - syx,
        syz - szy,
        sxx - syy - szz,
        sxy + syx,
        szx + sxz,
        szx - sxz,
        sxy + syx,
        -sxx + syy - szz,
        syz + szy,
        sxy - syx,
        szx + sxz,
        syz + szy,
        -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(k);
    let i = eig.eigenvalues.imax();
    let q = eig.eigenvectors.column(i);
    let rotation = *UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .matrix();
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in source.iter().zip(target) {
        num += (y - ct).dot(&(rotation * (x - cs)));
        den += (x - cs).norm_squared();
    }
    let scale = num / den;
    SimilarityTransform {
        rotation,
        translation: ct - rotation * cs * scale,
        scale,
    }
}

pub fn rotation_gap(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    c.clamp(-1.0, 1.0).acos()
}

/// Rigid ICP with exhaustive matching and quaternion fits.
pub fn brute_icp(source: &[Vec3], target: &[Vec3], iters: usize) -> Matrix3<f64> {
    let matches = |pts: &[Vec3]| -> (f64, Vec<Vec3>) {
        let mut sum = 0.0;
        let mut out = Vec::new();
        for p in pts {
            let (mut best, mut arg) = (f64::INFINITY, 0);
            for (i, q) in target.iter().enumerate() {
                let d = (p - q).norm();
                if d < best {
                    best = d;
                    arg = i;
                }
            }
            sum += best * best;
            out.push(target[arg]);
        }
        ((sum / pts.len() as f64).sqrt(), out)
    };
    let mut rotation = Matrix3::identity();
    let (mut rms, mut matched) = matches(source);
    for _ in 0..iters {
        let mut t = horn(source, &matched);
        t.scale = 1.0;
        let n = source.len() as f64;
        let cs = source.iter().sum::<Vec3>() / n;
        let ct = matched.iter().sum::<Vec3>() / n;
        t.translation = ct - t.rotation * cs;
        let moved: Vec<Vec3> = source.iter().map(|p| t.apply(p)).collect();
        let (r, m) = matches(&moved);
        if r > rms {
            break;
        }
        let gain = rms - r;
        rotation = t.rotation;
        rms = r;
        matched = m;
        if gain < 1e-6 {
            break;
        }
    }
    rotation
}

pub fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    // region tests on the triangle's Voronoi regions
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

pub fn brute_contacts(from: &SurfaceMesh, to: &SurfaceMesh, threshold: f64) -> BTreeSet<usize> {
    from.vertices()
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            (0..to.num_faces()).any(|f| {
                let [a, b, c] = to.face_positions(f);
                point_triangle_distance(p, &a, &b, &c) <= threshold
            })
        })
        .map(|(i, _)| i)
        .collect()
}

pub fn random_store(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingStore {
    let records = (0..n)
        .map(|i| EmbeddingRecord {
            id: format!("obj{i:05}"),
            embedding: (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
            mesh_path: format!("meshes/{i}.obj"),
            category: ["chair", "cup", "bike"][i % 3].to_string(),
        })
        .collect();
    EmbeddingStore::new(dim, records).unwrap()
}

pub fn brute_rank(store: &EmbeddingStore, q: &[f32]) -> Vec<(String, f64)> {
    let qn: f64 = q.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let mut all: Vec<(String, f64)> = store
        .records()
        .iter()
        .map(|r| {
            let mut dot = 0.0;
            let mut rn = 0.0;
            for (a, b) in q.iter().zip(&r.embedding) {
                dot += *a as f64 * *b as f64;
                rn += (*b as f64).powi(2);
            }
            (r.id.clone(), dot / (qn * rn.sqrt()))
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all
}

pub fn brute_iou(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let inter = a.iter().filter(|v| b.contains(v)).count() as f64;
    let union = a.len() as f64 + b.len() as f64 - inter;
    if union == 0.0 {
        0.0
    } else {
        inter / union
    }
}
