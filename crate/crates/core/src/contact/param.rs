use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ContactAxis, ContactError, ContactPatch};
use crate::geodesic::{log_map, nearest_source, shortest_geodesic_path};
use crate::mesh::{SurfaceMesh, SurfacePoint};

/// Axis coordinates of one patch vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub vertex: usize,
    /// Arclength of the closest axis point.
    pub t: f64,
    /// Geodesic distance from that axis point.
    pub d: f64,
    /// Angle from the axis tangent, counterclockwise, in (−π, π].
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPatch {
    pub patch_id: usize,
    pub axis_length: f64,
    pub records: Vec<ParamRecord>,
}

const WINDOW: usize = 2;
const NEWTON_STEPS: usize = 8;

/// Log-map coordinates of every patch vertex relative to its closest axis
/// point.
///
/// The axis is sampled every half mean edge length. A multi-source graph
/// search picks each vertex's nearest sample, exact geodesic distances to
/// the neighboring samples are fitted with a parabola, and the estimate is
/// polished with a few projection steps `t ← t + d·cos α`.
pub fn parameterize_patch(
    mesh: &SurfaceMesh,
    patch: &ContactPatch,
    axis: &ContactAxis,
) -> Result<ParamPatch, ContactError> {
    for &v in &patch.vertices {
        if v >= mesh.num_vertices() {
            return Err(ContactError::VertexOutOfRange {
                index: v,
                count: mesh.num_vertices(),
            });
        }
    }
    let length = axis.length();
    let spacing = mesh.mean_edge_length() / 2.0;
    let n = ((length / spacing).ceil() as usize).max(1) + 1;
    let ts: Vec<f64> = (0..n).map(|i| length * (i as f64 / (n - 1) as f64)).collect();
    let samples: Vec<SurfacePoint> = ts.iter().map(|&t| axis.point_at(mesh, t)).collect();
    let nearest = nearest_source(mesh, mesh.steiner_graph(), &samples, &patch.vertices);

    let records = patch
        .vertices
        .par_iter()
        .zip(nearest.par_iter())
        .map(|(&v, &(_, label))| {
            let target = mesh.vertex_point(v).expect("vertex has a face");
            let label = if label == usize::MAX { 0 } else { label };
            let dist = |i: usize| -> Result<f64, ContactError> {
                Ok(shortest_geodesic_path(mesh, &samples[i], &target)?.length())
            };
            let lo = label.saturating_sub(WINDOW);
            let hi = (label + WINDOW).min(n - 1);
            let mut best = (f64::INFINITY, label);
            let mut dists = vec![f64::INFINITY; n];
            for (i, slot) in dists.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *slot = dist(i)?;
                if *slot < best.0 {
                    best = (*slot, i);
                }
            }
            let j = best.1;
            let mut t = ts[j];
            if j > lo && j < hi {
                let (f0, f1, f2) = (dists[j - 1], dists[j], dists[j + 1]);
                let curv = f0 - 2.0 * f1 + f2;
                if curv > 0.0 {
                    let h = ts[j + 1] - ts[j];
                    t = (ts[j] + h * (f0 - f2) / (2.0 * curv)).clamp(ts[j - 1], ts[j + 1]);
                }
            }
            let polar = |t: f64| -> Result<(f64, f64), ContactError> {
                let base = axis.point_at(mesh, t);
                let tangent = axis.tangent_at(mesh, t);
                Ok(log_map(mesh, &base, &tangent, &target)?)
            };
            let (mut d, mut alpha) = polar(t)?;
            for _ in 0..NEWTON_STEPS {
                let next = (t + d * alpha.cos()).clamp(0.0, length);
                if (next - t).abs() < 1e-12 {
                    break;
                }
                let (nd, na) = polar(next)?;
                if nd > d {
                    break;
                }
                t = next;
                d = nd;
                alpha = na;
            }
            Ok(ParamRecord { vertex: v, t, d, alpha })
        })
        .collect::<Result<Vec<_>, ContactError>>()?;
    Ok(ParamPatch {
        patch_id: patch.id,
        axis_length: length,
        records,
    })
}
