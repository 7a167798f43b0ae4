//! Checkpoint container.
//!
//! Layout: magic `SGPH`, `u32` format version, `u64` header length, a
//! UTF-8 JSON header, then every tensor in header order as little-endian
//! `f32` values in row-major order.

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use super::hyper::Hyperparams;
use super::params::{expected_shapes, Params};
use super::train::Model;
use super::vocab::Vocabulary;
use super::ParserError;

pub const MAGIC: &[u8; 4] = b"SGPH";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    hyperparams: Hyperparams,
    vocab: Vocabulary,
    external_embeddings: bool,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

pub fn save_checkpoint(model: &Model) -> Vec<u8> {
    let named = model.params.named();
    let header = Header {
        hyperparams: model.hyperparams.clone(),
        vocab: model.vocab.clone(),
        external_embeddings: model.external_embeddings,
        tensors: named
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &named {
        for x in t.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<Model, ParserError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ParserError::BadMagic);
    }
    let truncated = || ParserError::ShapeMismatch("file truncated".to_string());
    let version = u32::from_le_bytes(bytes.get(4..8).ok_or_else(truncated)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ParserError::VersionUnsupported(version));
    }
    let header_len = u64::from_le_bytes(bytes.get(8..16).ok_or_else(truncated)?.try_into().unwrap());
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|l| l.checked_add(16))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(truncated)?;
    let header: Header =
        serde_json::from_slice(&bytes[16..header_end]).map_err(|e| ParserError::BadHeader(e.to_string()))?;
    header
        .hyperparams
        .validate()
        .map_err(|e| ParserError::BadHeader(e.to_string()))?;

    let expected: Vec<TensorEntry> =
        expected_shapes(&header.hyperparams, header.vocab.num_words(), header.vocab.num_labels())
            .into_iter()
            .map(|(name, shape)| TensorEntry { name, shape })
            .collect();
    if header.tensors != expected {
        return Err(ParserError::ShapeMismatch(
            "declared tensors disagree with the hyperparameters".to_string(),
        ));
    }

    let mut params: Params<f32> = Params::init(
        &header.hyperparams,
        header.vocab.num_words(),
        header.vocab.num_labels(),
        &mut <rand_xoshiro::Xoshiro256PlusPlus as rand::SeedableRng>::seed_from_u64(0),
    );
    let mut pos = header_end;
    for ((name, mut dst), entry) in params.named_mut().into_iter().zip(&header.tensors) {
        let count: usize = entry.shape.iter().product();
        let end = count
            .checked_mul(4)
            .and_then(|b| b.checked_add(pos))
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| ParserError::ShapeMismatch(format!("tensor {} truncated", name)))?;
        let values: Vec<f32> = bytes[pos..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let src = ArrayD::from_shape_vec(IxDyn(&entry.shape), values)
            .map_err(|e| ParserError::ShapeMismatch(e.to_string()))?;
        dst.assign(&src);
        pos = end;
    }
    if pos != bytes.len() {
        return Err(ParserError::ShapeMismatch(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - pos
        )));
    }
    Ok(Model {
        hyperparams: header.hyperparams,
        vocab: header.vocab,
        external_embeddings: header.external_embeddings,
        params,
    })
}
