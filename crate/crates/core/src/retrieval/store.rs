use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RetrievalError;

pub const STORE_MAGIC: &[u8; 8] = b"PICOEMB1";
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub embedding: Vec<f32>,
    pub mesh_path: String,
    pub category: String,
}

/// Records sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStore {
    dim: usize,
    records: Vec<EmbeddingRecord>,
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

impl EmbeddingStore {
    pub fn new(dim: usize, records: Vec<EmbeddingRecord>) -> Result<Self, RetrievalError> {
        let mut ids = BTreeSet::new();
        for r in &records {
            if r.embedding.len() != dim {
                return Err(RetrievalError::DimensionMismatch {
                    expected: dim,
                    got: r.embedding.len(),
                });
            }
            let n = norm(&r.embedding);
            if !(n > 0.0 && n.is_finite()) {
                return Err(RetrievalError::InvalidEmbedding(r.id.clone()));
            }
            if !ids.insert(r.id.as_str()) {
                return Err(RetrievalError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self { dim, records })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Binary layout, all integers u32 little-endian: magic, record count,
    /// dimension; then per record the id, `dim` f32 values, mesh path and
    /// category, each string as a byte length followed by UTF-8.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), RetrievalError> {
        let count = u32::try_from(self.records.len()).map_err(|_| RetrievalError::Format("too many records".into()))?;
        let dim = u32::try_from(self.dim).map_err(|_| RetrievalError::Format("dimension too large".into()))?;
        w.write_all(STORE_MAGIC)?;
        w.write_all(&count.to_le_bytes())?;
        w.write_all(&dim.to_le_bytes())?;
        for r in &self.records {
            write_str(&mut w, &r.id)?;
            for x in &r.embedding {
                w.write_all(&x.to_le_bytes())?;
            }
            write_str(&mut w, &r.mesh_path)?;
            write_str(&mut w, &r.category)?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, RetrievalError> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != STORE_MAGIC {
            return Err(RetrievalError::Format("bad magic".into()));
        }
        let count = read_u32(&mut r, "record count")? as usize;
        let dim = read_u32(&mut r, "dimension")? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            let id = read_str(&mut r, &format!("record {i} id"))?;
            let mut embedding = Vec::with_capacity(dim.min(1 << 16));
            for _ in 0..dim {
                let mut b = [0u8; 4];
                read_exact(&mut r, &mut b, "embedding")?;
                embedding.push(f32::from_le_bytes(b));
            }
            let mesh_path = read_str(&mut r, &format!("record {i} mesh path"))?;
            let category = read_str(&mut r, &format!("record {i} category"))?;
            records.push(EmbeddingRecord {
                id,
                embedding,
                mesh_path,
                category,
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(RetrievalError::Format("trailing bytes after the last record".into()));
        }
        Self::new(dim, records)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrievalError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn write_str(w: &mut impl Write, s: &str) -> Result<(), RetrievalError> {
    let n = u32::try_from(s.len()).map_err(|_| RetrievalError::Format("string too long".into()))?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), RetrievalError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => RetrievalError::Format(format!("truncated {what}")),
        _ => e.into(),
    })
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32, RetrievalError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(r: &mut impl Read, what: &str) -> Result<String, RetrievalError> {
    let n = read_u32(r, what)? as usize;
    let mut buf = Vec::with_capacity(n.min(1 << 16));
    r.take(n as u64).read_to_end(&mut buf)?;
    if buf.len() != n {
        return Err(RetrievalError::Format(format!("truncated {what}")));
    }
    String::from_utf8(buf).map_err(|_| RetrievalError::Format(format!("{what} is not UTF-8")))
}

/// `a·b / (‖a‖‖b‖)` in double precision.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    dot / (norm(a) * norm(b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored<'a, T> {
    pub record: &'a T,
    pub score: f64,
}

/// The `k` records most cosine-similar to `query`, best first, ties by
/// ascending id.
pub fn nn_objects<'a>(
    store: &'a EmbeddingStore,
    query: &[f32],
    k: usize,
) -> Result<Vec<Scored<'a, EmbeddingRecord>>, RetrievalError> {
    if query.len() != store.dim {
        return Err(RetrievalError::DimensionMismatch {
            expected: store.dim,
            got: query.len(),
        });
    }
    if store.is_empty() {
        return Err(RetrievalError::EmptyStore);
    }
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    let qn = norm(query);
    if !(qn > 0.0 && qn.is_finite()) {
        return Err(RetrievalError::InvalidEmbedding("query".into()));
    }
    let mut scored: Vec<Scored<EmbeddingRecord>> = store
        .records
        .iter()
        .map(|r| Scored {
            record: r,
            score: cosine(query, &r.embedding),
        })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.record.id.cmp(&b.record.id)));
    scored.truncate(k);
    Ok(scored)
}
