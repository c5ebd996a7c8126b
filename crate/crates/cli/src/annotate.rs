//! Two-click contact transfer shared by the `transfer` command and the
//! annotation service.

use std::collections::{BTreeMap, BTreeSet};

use contactfit::contact::{
    extract_patches, parameterize_patch, synthesize_axis, transfer_patch, unpack_axis, ContactAxis, ContactError,
    ContactPatch, ParamPatch, Transfer,
};
use contactfit::io::{AnnotationDocument, Clicks, PatchRecord};
use contactfit::SurfaceMesh;
use serde::{Deserialize, Serialize};

/// A body contact patch with its axis and axis coordinates.
#[derive(Debug, Clone)]
pub struct SourcePatch {
    pub patch: ContactPatch,
    pub axis: ContactAxis,
    pub param: ParamPatch,
}

/// Clicks for one patch, as stored in a clicks file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchClicks {
    pub patch_id: usize,
    #[serde(flatten)]
    pub clicks: Clicks,
}

/// Splits the contacts into patches and parameterizes each one. Patches
/// without a usable axis (single vertices, zero-length axes) are returned
/// separately by id.
pub fn prepare_patches(
    body: &SurfaceMesh,
    contacts: &BTreeSet<usize>,
) -> Result<(Vec<SourcePatch>, Vec<usize>), ContactError> {
    let mut ready = Vec::new();
    let mut skipped = Vec::new();
    for patch in extract_patches(body, contacts)? {
        match synthesize_axis(body, &patch) {
            Ok(axis) => {
                let param = parameterize_patch(body, &patch, &axis)?;
                ready.push(SourcePatch { patch, axis, param });
            }
            Err(ContactError::DegeneratePatch(..)) => skipped.push(patch.id),
            Err(e) => return Err(e),
        }
    }
    Ok((ready, skipped))
}

/// The object at metric size. Surface points are unaffected by the scaling.
pub fn scaled_object(object: &SurfaceMesh, scale: f64) -> SurfaceMesh {
    object.map_vertices(|p| p * scale)
}

/// Places one patch on the scaled object. `clicks.direction` is given in
/// the unscaled object frame.
pub fn place_patch(
    scaled: &SurfaceMesh,
    scale: f64,
    source: &SourcePatch,
    clicks: &Clicks,
) -> Result<(ContactAxis, Transfer), ContactError> {
    let axis = unpack_axis(scaled, &source.axis, &clicks.start, &(clicks.direction * scale))?;
    let transfer = transfer_patch(scaled, &source.param, &axis)?;
    Ok((axis, transfer))
}

pub fn patch_record(
    source: &SourcePatch,
    object_id: &str,
    clicks: Clicks,
    target_axis: ContactAxis,
    transfer: Transfer,
) -> PatchRecord {
    PatchRecord {
        patch_id: source.patch.id,
        source_axis: source.axis.clone(),
        param: source.param.clone(),
        object_id: object_id.to_string(),
        clicks,
        target_axis,
        correspondences: transfer.correspondences,
        extra: BTreeMap::new(),
    }
}

#[derive(Debug)]
pub struct TransferOutcome {
    pub document: AnnotationDocument,
    /// Patches without an axis.
    pub skipped: Vec<usize>,
    /// Patches with no clicks.
    pub unclicked: Vec<usize>,
    /// Source vertices that could not be placed, per patch.
    pub failed: Vec<(usize, Vec<usize>)>,
}

/// Transfers every clicked patch and assembles an annotation document.
pub fn transfer_all(
    body: &SurfaceMesh,
    contacts: &BTreeSet<usize>,
    object: &SurfaceMesh,
    object_id: &str,
    object_scale: f64,
    clicks: &[PatchClicks],
    image_id: &str,
) -> Result<TransferOutcome, anyhow::Error> {
    let (patches, skipped) = prepare_patches(body, contacts)?;
    let scaled = scaled_object(object, object_scale);
    let mut document = AnnotationDocument::new(image_id, contacts.clone());
    let mut unclicked = Vec::new();
    let mut failed = Vec::new();
    for source in &patches {
        let Some(c) = clicks.iter().find(|c| c.patch_id == source.patch.id) else {
            unclicked.push(source.patch.id);
            continue;
        };
        let (axis, transfer) = place_patch(&scaled, object_scale, source, &c.clicks)
            .map_err(|e| anyhow::anyhow!("patch {}: {e}", source.patch.id))?;
        if !transfer.failed.is_empty() {
            failed.push((source.patch.id, transfer.failed.clone()));
        }
        document
            .patches
            .push(patch_record(source, object_id, c.clicks, axis, transfer));
    }
    for c in clicks {
        if !patches.iter().any(|p| p.patch.id == c.patch_id) {
            anyhow::bail!("clicks given for unknown patch {}", c.patch_id);
        }
    }
    Ok(TransferOutcome {
        document,
        skipped,
        unclicked,
        failed,
    })
}
