use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbeddingStore, RetrievalError};
use crate::contact::{ContactAxis, CorrespondenceSet, ParamPatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedPatch {
    pub param: ParamPatch,
    pub target_axis: ContactAxis,
}

/// A body contact paired with an object, its contact patches and
/// correspondences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactAnnotationRecord {
    pub id: u64,
    pub image_id: String,
    pub body_contacts: BTreeSet<usize>,
    pub object_id: String,
    #[serde(default)]
    pub patches: Vec<AnnotatedPatch>,
    #[serde(default)]
    pub correspondences: CorrespondenceSet,
    /// Meters.
    pub object_scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationStore {
    records: Vec<ContactAnnotationRecord>,
}

impl AnnotationStore {
    pub fn new(records: Vec<ContactAnnotationRecord>) -> Result<Self, RetrievalError> {
        let mut ids = HashSet::new();
        for r in &records {
            if r.body_contacts.is_empty() {
                return Err(RetrievalError::EmptyContacts(r.id));
            }
            if !ids.insert(r.id) {
                return Err(RetrievalError::DuplicateId(r.id.to_string()));
            }
            if !(r.object_scale > 0.0 && r.object_scale.is_finite()) {
                return Err(RetrievalError::Format(format!(
                    "record {} has object scale {}",
                    r.id, r.object_scale
                )));
            }
        }
        Ok(Self { records })
    }

    /// Checks that every record's object exists in `objects`.
    pub fn check_objects(&self, objects: &EmbeddingStore) -> Result<(), RetrievalError> {
        for r in &self.records {
            if objects.get(&r.object_id).is_none() {
                return Err(RetrievalError::UnknownObject {
                    record: r.id,
                    object: r.object_id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn records(&self) -> &[ContactAnnotationRecord] {
        &self.records
    }

    pub fn get(&self, id: u64) -> Option<&ContactAnnotationRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self, RetrievalError> {
        let records: Vec<ContactAnnotationRecord> =
            serde_json::from_str(text).map_err(|e| RetrievalError::Format(e.to_string()))?;
        Self::new(records)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("annotation records serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrievalError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn iou(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// The record whose body contacts have the highest IoU with `query`, ties by
/// smallest record id. Returns the record and its IoU.
pub fn nn_contact_annotation<'a>(
    store: &'a AnnotationStore,
    query: &BTreeSet<usize>,
) -> Result<(&'a ContactAnnotationRecord, f64), RetrievalError> {
    store
        .records
        .iter()
        .map(|r| (r, iou(query, &r.body_contacts)))
        .max_by(|(ra, a), (rb, b)| a.total_cmp(b).then_with(|| rb.id.cmp(&ra.id)))
        .ok_or(RetrievalError::EmptyStore)
}
