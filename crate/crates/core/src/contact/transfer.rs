use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ContactAxis, ContactError, ParamPatch};
use crate::geodesic::{exp_map, GeodesicError};
use crate::mesh::{SurfaceMesh, SurfacePoint};

/// A body vertex paired with a point on the object surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub body_vertex: usize,
    pub object_point: SurfacePoint,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceSet {
    pub pairs: Vec<Correspondence>,
    pub patch_ids: Vec<usize>,
}

impl CorrespondenceSet {
    /// Appends another set. Pairs whose body vertex is already present are
    /// skipped so every body vertex appears at most once.
    pub fn merge(&mut self, other: &CorrespondenceSet) {
        let mut seen: std::collections::HashSet<usize> = self.pairs.iter().map(|p| p.body_vertex).collect();
        for p in &other.pairs {
            if seen.insert(p.body_vertex) {
                self.pairs.push(*p);
            }
        }
        for id in &other.patch_ids {
            if !self.patch_ids.contains(id) {
                self.patch_ids.push(*id);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Output of [`transfer_patch`]. `points[i]` pairs with
/// `correspondences.pairs[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub points: Vec<SurfacePoint>,
    pub correspondences: CorrespondenceSet,
    /// Source vertices whose exp map could not be traced.
    pub failed: Vec<usize>,
}

/// Places every parameterized vertex on `target` via the exp map around the
/// target axis.
pub fn transfer_patch(target: &SurfaceMesh, param: &ParamPatch, axis: &ContactAxis) -> Result<Transfer, ContactError> {
    if (axis.length() - param.axis_length).abs() > 1e-6 {
        return Err(ContactError::AxisLengthMismatch {
            expected: param.axis_length,
            target: axis.length(),
        });
    }
    let scale = if param.axis_length > 0.0 {
        axis.length() / param.axis_length
    } else {
        1.0
    };
    let results: Vec<Result<SurfacePoint, GeodesicError>> = param
        .records
        .par_iter()
        .map(|r| {
            let t = r.t * scale;
            let base = axis.point_at(target, t);
            let tangent = axis.tangent_at(target, t);
            exp_map(target, &base, &tangent, r.d, r.alpha)
        })
        .collect();
    let mut points = Vec::with_capacity(results.len());
    let mut pairs = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (r, res) in param.records.iter().zip(results) {
        match res {
            Ok(p) => {
                points.push(p);
                pairs.push(Correspondence {
                    body_vertex: r.vertex,
                    object_point: p,
                });
            }
            Err(GeodesicError::TracingStuck(_)) => failed.push(r.vertex),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Transfer {
        points,
        correspondences: CorrespondenceSet {
            pairs,
            patch_ids: vec![param.patch_id],
        },
        failed,
    })
}
