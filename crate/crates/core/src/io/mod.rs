//! File formats: OBJ and binary PLY meshes, PGM/PBM masks, annotation
//! documents and JSON artifacts.

mod annotation;
mod mask;
mod obj;
mod ply;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::body::{BodyError, BodyModel, BodySpec};
use crate::fit::SilhouetteMask;
use crate::mesh::{MeshError, SurfaceMesh};

pub use annotation::{AnnotationDocument, Clicks, PatchRecord, SCHEMA_MAJOR, SCHEMA_VERSION};
pub use mask::{read_mask, write_pbm, write_pgm, FOREGROUND_THRESHOLD};
pub use obj::{read_obj, write_obj};
pub use ply::{read_ply, write_ply};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("parse error at line {line}, byte {offset}: {message}")]
    Parse {
        /// 1-based; 0 for binary sections.
        line: usize,
        offset: usize,
        message: String,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error("unsupported schema version {0:?}")]
    SchemaVersionUnsupported(String),
    #[error("duplicate patch id {0}")]
    DuplicatePatchId(usize),
    #[error("patch {patch}: {message}")]
    InvalidClick { patch: usize, message: String },
    #[error("unrecognized file type: {0}")]
    UnknownFormat(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Io(e.to_string())
    }
}

pub(crate) fn parse_error(line: usize, offset: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        offset,
        message: message.into(),
    }
}

fn json_error(text: &str, e: serde_json::Error) -> IoError {
    let line = e.line();
    let offset = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + e.column().saturating_sub(1);
    parse_error(line, offset, e.to_string())
}

/// Parses one JSON document, rejecting anything after it.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|e| json_error(text, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, IoError> {
    from_json(&fs::read_to_string(path)?)
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), IoError> {
    fs::write(path, to_json(value))?;
    Ok(())
}

/// Reads an OBJ (text) or binary little-endian PLY mesh, chosen by content.
pub fn load_mesh_file(path: impl AsRef<Path>) -> Result<SurfaceMesh, IoError> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.starts_with(b"ply") {
        read_ply(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|e| parse_error(0, e.valid_up_to(), "OBJ is not UTF-8"))?;
        read_obj(text)
    }
}

/// Writes PLY for a `.ply` extension and OBJ otherwise.
pub fn save_mesh_file(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) {
        fs::write(path, write_ply(mesh))?;
    } else {
        fs::write(path, write_obj(mesh))?;
    }
    Ok(())
}

pub fn load_mask_file(path: impl AsRef<Path>) -> Result<SilhouetteMask, IoError> {
    read_mask(&fs::read(path)?)
}

pub fn save_mask_file(mask: &SilhouetteMask, path: impl AsRef<Path>) -> Result<(), IoError> {
    fs::write(path, write_pgm(mask))?;
    Ok(())
}

/// A body model stored as a JSON [`BodySpec`].
pub fn load_body_model(path: impl AsRef<Path>) -> Result<BodyModel, IoError> {
    let spec: BodySpec = load_json(path)?;
    Ok(BodyModel::new(spec)?)
}

pub fn save_body_model(model: &BodyModel, path: impl AsRef<Path>) -> Result<(), IoError> {
    save_json(&model.to_spec(), path)
}

pub fn load_annotation(path: impl AsRef<Path>) -> Result<AnnotationDocument, IoError> {
    AnnotationDocument::from_json(&fs::read_to_string(path)?)
}

pub fn save_annotation(doc: &AnnotationDocument, path: impl AsRef<Path>) -> Result<(), IoError> {
    doc.validate()?;
    fs::write(path, doc.to_json())?;
    Ok(())
}
