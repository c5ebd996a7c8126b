//! Evaluation metrics: Procrustes-aligned Chamfer distances, ICP, contact
//! extraction from ground-truth meshes and contact F1.

mod kdtree;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::align::SimilarityTransform;
use crate::align::{umeyama, AlignError};
use crate::mesh::{SurfaceMesh, Vec3};
pub use kdtree::KdTree;

pub const DEFAULT_SAMPLES: usize = 8192;
pub const DEFAULT_CONTACT_THRESHOLD: f64 = 0.05;
pub const SAMPLE_SEED: u64 = 0x5eed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("empty input")]
    Empty,
}

impl From<AlignError> for EvalError {
    fn from(e: AlignError) -> Self {
        EvalError::DegenerateConfiguration(e.to_string())
    }
}

/// Uniform-by-area surface samples drawn from a fixed-seed stream. Meshes
/// with proportional face areas receive the same faces and barycentrics.
pub fn sample_surface(mesh: &SurfaceMesh, n: usize, seed: u64) -> Vec<Vec3> {
    sample_surface_excluding(mesh, n, seed, &BTreeSet::new())
}

/// [`sample_surface`] restricted to faces with no vertex in `excluded`.
/// Empty when every face is excluded or the mesh has no area.
pub fn sample_surface_excluding(mesh: &SurfaceMesh, n: usize, seed: u64, excluded: &BTreeSet<usize>) -> Vec<Vec3> {
    let mut cdf = Vec::with_capacity(mesh.num_faces());
    let mut acc = 0.0;
    for (f, face) in mesh.faces().iter().enumerate() {
        if !face.iter().any(|v| excluded.contains(v)) {
            acc += mesh.area(f);
        }
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            let f = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            let [a, b, c] = mesh.face_positions(f);
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect()
}

/// Least-squares similarity transform taking `source[i]` onto `target[i]`.
pub fn procrustes_align(source: &[Vec3], target: &[Vec3]) -> Result<SimilarityTransform, EvalError> {
    Ok(umeyama(source, target, true)?)
}

fn directed_mean(from: &[Vec3], to: &KdTree) -> f64 {
    from.iter().map(|p| to.nearest(p).expect("non-empty").1).sum::<f64>() / from.len() as f64
}

/// Symmetric mean nearest-neighbor distance, in centimeters.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Empty);
    }
    let ta = KdTree::build(a);
    let tb = KdTree::build(b);
    Ok(50.0 * (directed_mean(a, &tb) + directed_mean(b, &ta)))
}

/// Chamfer distances after one Procrustes alignment of the combined
/// prediction onto the combined ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaCd {
    pub human: f64,
    pub object: f64,
    pub combined: f64,
    pub transform: SimilarityTransform,
}

pub fn pa_cd(
    pred_h: &SurfaceMesh,
    pred_o: &SurfaceMesh,
    gt_h: &SurfaceMesh,
    gt_o: &SurfaceMesh,
    samples: usize,
) -> Result<PaCd, EvalError> {
    pa_cd_excluding(pred_h, pred_o, gt_h, gt_o, samples, &BTreeSet::new())
}

/// [`pa_cd`] with faces touching `human_excluded` vertices left out of both
/// body samplings, for bodies whose topologies differ in some region.
pub fn pa_cd_excluding(
    pred_h: &SurfaceMesh,
    pred_o: &SurfaceMesh,
    gt_h: &SurfaceMesh,
    gt_o: &SurfaceMesh,
    samples: usize,
    human_excluded: &BTreeSet<usize>,
) -> Result<PaCd, EvalError> {
    if samples == 0 {
        return Err(EvalError::Empty);
    }
    let none = BTreeSet::new();
    let ph = sample_surface_excluding(pred_h, samples, SAMPLE_SEED, human_excluded);
    let po = sample_surface_excluding(pred_o, samples, SAMPLE_SEED + 1, &none);
    let gh = sample_surface_excluding(gt_h, samples, SAMPLE_SEED, human_excluded);
    let go = sample_surface_excluding(gt_o, samples, SAMPLE_SEED + 1, &none);
    let pred: Vec<Vec3> = ph.iter().chain(&po).copied().collect();
    let gt: Vec<Vec3> = gh.iter().chain(&go).copied().collect();
    let transform = procrustes_align(&pred, &gt)?;
    let ah: Vec<Vec3> = ph.iter().map(|p| transform.apply(p)).collect();
    let ao: Vec<Vec3> = po.iter().map(|p| transform.apply(p)).collect();
    let all: Vec<Vec3> = ah.iter().chain(&ao).copied().collect();
    Ok(PaCd {
        human: chamfer(&ah, &gh)?,
        object: chamfer(&ao, &go)?,
        combined: chamfer(&all, &gt)?,
        transform,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    pub transform: SimilarityTransform,
    /// Root-mean-square correspondence distance before each update, then
    /// after the last one.
    pub residuals: Vec<f64>,
}

fn rms_to(tree: &KdTree, points: &[Vec3], target: &[Vec3]) -> (f64, Vec<Vec3>) {
    let mut sum = 0.0;
    let mut matched = Vec::with_capacity(points.len());
    for p in points {
        let (i, d) = tree.nearest(p).expect("non-empty");
        sum += d * d;
        matched.push(target[i]);
    }
    ((sum / points.len() as f64).sqrt(), matched)
}

/// Rigid ICP from the identity: nearest-neighbor matching alternated with
/// a closed-form rigid fit until the RMS distance improves by less than
/// 1e-6 or `max_iters` updates.
pub fn icp_align(source: &[Vec3], target: &[Vec3], max_iters: usize) -> Result<IcpResult, EvalError> {
    if source.is_empty() || target.is_empty() {
        return Err(EvalError::Empty);
    }
    let tree = KdTree::build(target);
    let mut transform = SimilarityTransform::identity();
    let (mut rms, mut matched) = rms_to(&tree, source, target);
    let mut residuals = vec![rms];
    for _ in 0..max_iters {
        let next = umeyama(source, &matched, false)?;
        let moved: Vec<Vec3> = source.iter().map(|p| next.apply(p)).collect();
        let (r, m) = rms_to(&tree, &moved, target);
        if r > rms {
            break;
        }
        residuals.push(r);
        let gain = rms - r;
        transform = next;
        rms = r;
        matched = m;
        if gain < 1e-6 {
            break;
        }
    }
    Ok(IcpResult { transform, residuals })
}

/// Body vertices within `threshold` of the object surface, and object
/// vertices within `threshold` of the body surface.
pub fn gt_contact_extract(
    human: &SurfaceMesh,
    object: &SurfaceMesh,
    threshold: f64,
) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let near = |from: &SurfaceMesh, to: &SurfaceMesh| -> BTreeSet<usize> {
        from.vertices()
            .iter()
            .enumerate()
            .filter(|(_, p)| to.closest_point(p).1 <= threshold)
            .map(|(i, _)| i)
            .collect()
    };
    (near(human, object), near(object, human))
}

/// `(precision, recall, F1)`. Two empty sets agree perfectly.
pub fn contact_f1(pred: &BTreeSet<usize>, gt: &BTreeSet<usize>) -> (f64, f64, f64) {
    if pred.is_empty() && gt.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    if pred.is_empty() || gt.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let tp = pred.intersection(gt).count() as f64;
    let p = tp / pred.len() as f64;
    let r = tp / gt.len() as f64;
    let f1 = if tp == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_arithmetic() {
        let gt: BTreeSet<usize> = (0..200).collect();
        let pred: BTreeSet<usize> = (150..250).collect();
        let (p, r, f) = contact_f1(&pred, &gt);
        assert_eq!((p, r), (0.5, 0.25));
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn chamfer_by_hand() {
        let a = [Vec3::zeros(), Vec3::new(0.1, 0.0, 0.0)];
        let b = [Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.2, 0.0, 0.0)];
        // a→b: 0.1 and 0; b→a: 0 and 0.1; means 0.05 each
        assert!((chamfer(&a, &b).unwrap() - 5.0).abs() < 1e-12);
    }
}
