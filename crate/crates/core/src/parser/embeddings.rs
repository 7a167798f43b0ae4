//! Precomputed per-token vectors.
//!
//! File layout (little-endian): magic `SGEM`, `u32` dimension, `u64`
//! record count, then per record a `u32` byte length and the UTF-8
//! sent_id, a `u32` 1-based token index and `dim` `f32` values.

use std::collections::HashMap;

use ndarray::Array2;

use super::params::Float;
use super::ParserError;
use crate::model::Sentence;

const EMBEDDING_MAGIC: &[u8; 4] = b"SGEM";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingFile {
    pub dim: usize,
    pub vectors: HashMap<(String, usize), Vec<f32>>,
}

impl EmbeddingFile {
    pub fn new(dim: usize) -> Self {
        EmbeddingFile {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, sent_id: &str, token: usize, vector: Vec<f32>) -> Result<(), ParserError> {
        if vector.len() != self.dim {
            return Err(ParserError::DimMismatch(format!(
                "vector of length {} in a {}-dimensional file",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.insert((sent_id.to_string(), token), vector);
        Ok(())
    }

    pub fn get(&self, sent_id: &str, token: usize) -> Option<&[f32]> {
        self.vectors.get(&(sent_id.to_string(), token)).map(Vec::as_slice)
    }
}

/// Where token vectors come from.
#[derive(Debug, Clone, Default)]
pub enum EmbeddingProvider {
    /// The embedding table trained with the rest of the network.
    #[default]
    Trainable,
    /// Fixed vectors looked up by (sent_id, token index).
    Precomputed(EmbeddingFile),
}

impl EmbeddingProvider {
    pub fn is_external(&self) -> bool {
        matches!(self, EmbeddingProvider::Precomputed(_))
    }

    /// Vectors for tokens 1..=n of `s`, or `None` for the trainable table.
    pub fn vectors<F: Float>(&self, s: &Sentence, dim: usize) -> Result<Option<Array2<F>>, ParserError> {
        let EmbeddingProvider::Precomputed(file) = self else {
            return Ok(None);
        };
        if file.dim != dim {
            return Err(ParserError::DimMismatch(format!(
                "embedding file has dimension {}, model expects {}",
                file.dim, dim
            )));
        }
        let mut out = Array2::zeros((s.tokens.len(), dim));
        for (row, tok) in s.tokens.iter().enumerate() {
            let v = file
                .get(&s.sent_id, tok.index)
                .ok_or_else(|| ParserError::EmbeddingMissing {
                    sent_id: s.sent_id.clone(),
                    token: tok.index,
                })?;
            for (k, &x) in v.iter().enumerate() {
                out[[row, k]] = F::lit(x as f64);
            }
        }
        Ok(Some(out))
    }
}

/// Serialize with records sorted by (sent_id, token).
pub fn write_embeddings(file: &EmbeddingFile) -> Vec<u8> {
    let mut keys: Vec<_> = file.vectors.keys().collect();
    keys.sort();
    let mut out = Vec::new();
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(file.dim as u32).to_le_bytes());
    out.extend_from_slice(&(keys.len() as u64).to_le_bytes());
    for key in keys {
        let (sent_id, token) = key;
        out.extend_from_slice(&(sent_id.len() as u32).to_le_bytes());
        out.extend_from_slice(sent_id.as_bytes());
        out.extend_from_slice(&(*token as u32).to_le_bytes());
        for x in &file.vectors[key] {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ParserError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ParserError::BadEmbeddings(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ParserError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ParserError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_embeddings(bytes: &[u8]) -> Result<EmbeddingFile, ParserError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(EMBEDDING_MAGIC.as_slice()) {
        return Err(ParserError::BadMagic);
    }
    let dim = r.u32()? as usize;
    let count = r.u64()?;
    let mut file = EmbeddingFile::new(dim);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let sent_id = std::str::from_utf8(r.take(len)?)
            .map_err(|_| ParserError::BadEmbeddings("sent_id is not UTF-8".to_string()))?
            .to_string();
        let token = r.u32()? as usize;
        let raw = r.take(
            dim.checked_mul(4)
                .ok_or_else(|| ParserError::BadEmbeddings("dimension".into()))?,
        )?;
        let v = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        file.vectors.insert((sent_id, token), v);
    }
    if r.pos != bytes.len() {
        return Err(ParserError::BadEmbeddings("trailing bytes".to_string()));
    }
    Ok(file)
}
