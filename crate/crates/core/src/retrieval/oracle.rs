use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::body::{part_index, PART_NAMES};

pub const FOOT_PARTS: [&str; 4] = ["leftFootSole", "rightFootSole", "topOfLeftFoot", "topOfRightFoot"];

/// Transport attempts per question before giving up.
pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Canned,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    /// Meters.
    pub scale: Option<f64>,
    pub parts: Option<Vec<String>>,
    pub provenance: Provenance,
}

impl OracleResponse {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if let Some(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(RetrievalError::MalformedAnswer {
                    answer: s.to_string(),
                    reason: "scale must be a positive number",
                });
            }
        }
        for p in self.parts.iter().flatten() {
            if part_index(p).is_none() {
                return Err(RetrievalError::UnknownPart(p.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CannedEntry {
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub parts: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Question {
    Scale,
    Parts,
}

impl Question {
    pub fn prompt(self, object_label: &str) -> String {
        match self {
            Question::Scale => format!(
                "Estimate the largest dimension of the {object_label} shown in this image. \
                 Reply with a single number in meters and nothing else."
            ),
            Question::Parts => format!(
                "Which body parts of the person touch the {object_label} in this image? \
                 Reply with a comma-separated list drawn only from: {}.",
                PART_NAMES.join(", ")
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRequest {
    pub image_id: String,
    pub object_label: String,
    pub question: Question,
    pub prompt: String,
}

/// Delivers one request to a live oracle and returns its raw text answer.
pub trait OracleTransport: Send + Sync {
    fn ask(&self, request: &OracleRequest) -> Result<String, String>;
}

pub enum OracleClient {
    Canned(BTreeMap<String, CannedEntry>),
    Live(Box<dyn OracleTransport>),
}

impl OracleClient {
    /// Parses a JSON object mapping image ids to canned entries.
    pub fn canned_from_json(text: &str) -> Result<Self, RetrievalError> {
        let map: BTreeMap<String, CannedEntry> =
            serde_json::from_str(text).map_err(|e| RetrievalError::Format(e.to_string()))?;
        Ok(OracleClient::Canned(map))
    }

    pub fn canned_from_file(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        Self::canned_from_json(&fs::read_to_string(path)?)
    }

    pub fn live(transport: impl OracleTransport + 'static) -> Self {
        OracleClient::Live(Box::new(transport))
    }
}

/// Strict scale answer: one finite positive number, surrounding whitespace
/// allowed.
pub fn parse_scale(answer: &str) -> Result<f64, RetrievalError> {
    let malformed = |reason| RetrievalError::MalformedAnswer {
        answer: answer.to_string(),
        reason,
    };
    let v: f64 = answer
        .trim()
        .parse()
        .map_err(|_| malformed("expected a single number"))?;
    if !v.is_finite() || v <= 0.0 {
        return Err(malformed("scale must be a positive number"));
    }
    Ok(v)
}

/// Comma-separated part names from the body part vocabulary. Matching
/// ignores case; duplicates are dropped.
pub fn parse_parts(answer: &str) -> Result<Vec<String>, RetrievalError> {
    let mut out: Vec<String> = Vec::new();
    for item in answer.trim().split(',') {
        let item = item.trim();
        let name = PART_NAMES
            .iter()
            .find(|p| p.eq_ignore_ascii_case(item))
            .ok_or_else(|| RetrievalError::MalformedAnswer {
                answer: answer.to_string(),
                reason: "expected a comma-separated list of body part names",
            })?;
        if !out.iter().any(|o| o == name) {
            out.push(name.to_string());
        }
    }
    Ok(out)
}

fn ask(transport: &dyn OracleTransport, request: &OracleRequest) -> Result<String, RetrievalError> {
    let mut last = String::new();
    for _ in 0..MAX_ATTEMPTS {
        match transport.ask(request) {
            Ok(answer) => return Ok(answer),
            Err(e) => last = e,
        }
    }
    Err(RetrievalError::Transport(last))
}

/// Scale and contact-part hints for one image.
pub fn oracle_query(
    client: &OracleClient,
    image_id: &str,
    object_label: &str,
) -> Result<OracleResponse, RetrievalError> {
    let response = match client {
        OracleClient::Canned(map) => {
            let entry = map
                .get(image_id)
                .ok_or_else(|| RetrievalError::MissingCannedEntry(image_id.to_string()))?;
            OracleResponse {
                scale: entry.scale,
                parts: entry.parts.clone(),
                provenance: Provenance::Canned,
            }
        }
        OracleClient::Live(transport) => {
            let request = |question: Question| OracleRequest {
                image_id: image_id.to_string(),
                object_label: object_label.to_string(),
                question,
                prompt: question.prompt(object_label),
            };
            let scale = parse_scale(&ask(transport.as_ref(), &request(Question::Scale))?)?;
            let parts = parse_parts(&ask(transport.as_ref(), &request(Question::Parts))?)?;
            OracleResponse {
                scale: Some(scale),
                parts: Some(parts),
                provenance: Provenance::Live,
            }
        }
    };
    response.validate()?;
    Ok(response)
}

/// Adjusts predicted body contacts with the oracle's part list: foot parts
/// the oracle does not name are cleared, and every named part without a
/// predicted contact gains its whole vertex set. No parts list means no
/// change.
pub fn refine_contacts(
    detected: &BTreeSet<usize>,
    oracle: &OracleResponse,
    part_map: &BTreeMap<String, BTreeSet<usize>>,
) -> Result<BTreeSet<usize>, RetrievalError> {
    let Some(parts) = &oracle.parts else {
        return Ok(detected.clone());
    };
    for p in parts {
        if part_index(p).is_none() || !part_map.contains_key(p) {
            return Err(RetrievalError::UnknownPart(p.clone()));
        }
    }
    let mut out = detected.clone();
    for foot in FOOT_PARTS {
        if parts.iter().any(|p| p == foot) {
            continue;
        }
        if let Some(vs) = part_map.get(foot) {
            out.retain(|v| !vs.contains(v));
        }
    }
    for p in parts {
        let vs = &part_map[p];
        if vs.is_disjoint(detected) {
            out.extend(vs.iter().copied());
        }
    }
    Ok(out)
}
