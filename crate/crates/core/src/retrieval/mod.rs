//! Object retrieval by embedding similarity, contact-annotation lookup by
//! IoU, and contact refinement from an external oracle's hints.

mod annotations;
mod oracle;
mod store;

use thiserror::Error;

pub use annotations::{nn_contact_annotation, AnnotatedPatch, AnnotationStore, ContactAnnotationRecord};
pub use oracle::{
    oracle_query, parse_parts, parse_scale, refine_contacts, CannedEntry, OracleClient, OracleRequest, OracleResponse,
    OracleTransport, Provenance, Question, FOOT_PARTS, MAX_ATTEMPTS,
};
pub use store::{cosine, nn_objects, EmbeddingRecord, EmbeddingStore, Scored, DEFAULT_K, STORE_MAGIC};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("store is empty")]
    EmptyStore,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("record {0:?} has a zero or non-finite embedding")]
    InvalidEmbedding(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("malformed store file: {0}")]
    Format(String),
    #[error("annotation record {0} has no body contacts")]
    EmptyContacts(u64),
    #[error("annotation record {record} references unknown object {object:?}")]
    UnknownObject { record: u64, object: String },
    #[error("unknown body part {0:?}")]
    UnknownPart(String),
    #[error("no canned oracle entry for image {0:?}")]
    MissingCannedEntry(String),
    #[error("malformed oracle answer {answer:?}: {reason}")]
    MalformedAnswer { answer: String, reason: &'static str },
    #[error("oracle transport failed: {0}")]
    Transport(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for RetrievalError {
    fn from(e: std::io::Error) -> Self {
        RetrievalError::Io(e.to_string())
    }
}
