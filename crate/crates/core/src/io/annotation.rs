use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{from_json, to_json, IoError};
use crate::contact::{ContactAxis, CorrespondenceSet, ParamPatch};
use crate::mesh::{SurfaceMesh, SurfacePoint, Vec3};

/// Written into new documents.
pub const SCHEMA_VERSION: &str = "1.0";
/// Documents with this major version load; higher minors may add fields.
pub const SCHEMA_MAJOR: u32 = 1;

const CLICK_TOLERANCE: f64 = 1e-6;

/// The two clicks placing a target axis: its start on the object and a
/// second surface point giving the direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clicks {
    pub start: SurfacePoint,
    pub direction: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub patch_id: usize,
    pub source_axis: ContactAxis,
    pub param: ParamPatch,
    pub object_id: String,
    pub clicks: Clicks,
    pub target_axis: ContactAxis,
    pub correspondences: CorrespondenceSet,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// One annotated image: body contacts and their transfer onto an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationDocument {
    pub schema_version: String,
    pub image_id: String,
    #[serde(default)]
    pub image_path: String,
    pub body_contacts: BTreeSet<usize>,
    pub patches: Vec<PatchRecord>,
    #[serde(default)]
    pub annotator: String,
    /// Free-form timestamps, RFC 3339 by convention.
    #[serde(default)]
    pub created: String,
    #[serde(default)]
    pub updated: String,
    /// Fields this version does not know, kept for rewriting.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl AnnotationDocument {
    pub fn new(image_id: impl Into<String>, body_contacts: BTreeSet<usize>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            image_id: image_id.into(),
            image_path: String::new(),
            body_contacts,
            patches: vec![],
            annotator: String::new(),
            created: String::new(),
            updated: String::new(),
            extra: BTreeMap::new(),
        }
    }

    /// Schema version and unique patch ids.
    pub fn validate(&self) -> Result<(), IoError> {
        let major = self
            .schema_version
            .split('.')
            .next()
            .and_then(|m| m.parse::<u32>().ok());
        if major != Some(SCHEMA_MAJOR) {
            return Err(IoError::SchemaVersionUnsupported(self.schema_version.clone()));
        }
        let mut seen = BTreeSet::new();
        for p in &self.patches {
            if !seen.insert(p.patch_id) {
                return Err(IoError::DuplicatePatchId(p.patch_id));
            }
        }
        Ok(())
    }

    /// Checks that each patch's clicks lie on the mesh of its object.
    pub fn check_clicks<'m>(&self, mut object: impl FnMut(&str) -> Option<&'m SurfaceMesh>) -> Result<(), IoError> {
        for p in &self.patches {
            let invalid = |message: String| IoError::InvalidClick {
                patch: p.patch_id,
                message,
            };
            let mesh = object(&p.object_id).ok_or_else(|| invalid(format!("unknown object {:?}", p.object_id)))?;
            mesh.validate_point(&p.clicks.start)
                .map_err(|e| invalid(e.to_string()))?;
            let (_, d) = mesh.closest_point(&p.clicks.direction);
            if d > CLICK_TOLERANCE {
                return Err(invalid(format!("second click is {d:e} off the surface")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let doc: Self = from_json(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}
