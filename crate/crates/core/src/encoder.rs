//! Node text encoders and the on-disk node-embedding cache.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const START_MARKER: &str = "[CLS]";
pub const END_MARKER: &str = "[SEP]";

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("unknown encoder `{id}`; registered encoders: {registered}")]
    Unknown { id: String, registered: String },
    #[error("encoder `{0}` has no trainable weights; fine-tuning is unavailable")]
    NotTrainable(String),
    #[error("cannot encode an empty token sequence")]
    Empty,
    #[error("embedding cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub encoder_id: String,
    pub fine_tune: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { encoder_id: "hash-64".into(), fine_tune: false }
    }
}

/// Maps a token sequence to a fixed-size vector by mean pooling over the
/// token vectors and the start/end markers, `n + 2` vectors in all.
pub trait NodeEncoder: Send + Sync + std::fmt::Debug {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn token_vectors(&self, tokens: &[&str]) -> Vec<Vec<f64>>;

    fn encode(&self, tokens: &[&str]) -> Result<Vec<f64>, EncoderError> {
        if tokens.is_empty() {
            return Err(EncoderError::Empty);
        }
        let mut framed = Vec::with_capacity(tokens.len() + 2);
        framed.push(START_MARKER);
        framed.extend_from_slice(tokens);
        framed.push(END_MARKER);
        let vectors = self.token_vectors(&framed);
        let mut out = vec![0.0; self.dim()];
        for v in &vectors {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
        let n = vectors.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        Ok(out)
    }

    fn encode_key(&self, key: &str) -> Result<Vec<f64>, EncoderError> {
        let tokens: Vec<&str> = key.split(' ').filter(|t| !t.is_empty()).collect();
        self.encode(&tokens)
    }
}

/// Reference encoder: every token gets a pseudorandom unit vector derived
/// from a digest of the token. Context-free, so token order is invisible.
#[derive(Debug, Clone)]
pub struct HashEncoder {
    id: String,
    dim: usize,
}

impl HashEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "encoder dimension must be positive");
        HashEncoder { id: format!("hash-{dim}"), dim }
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let digest = Sha256::digest(token.as_bytes());
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..self.dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

impl NodeEncoder for HashEncoder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn token_vectors(&self, tokens: &[&str]) -> Vec<Vec<f64>> {
        tokens.iter().map(|t| self.token_vector(t)).collect()
    }
}

/// Looks up an encoder by id. Only `hash-<d>` encoders are built in;
/// contextual encoders plug in through [`NodeEncoder`].
pub fn encoder_from_config(config: &EncoderConfig) -> Result<Box<dyn NodeEncoder>, EncoderError> {
    let unknown = || EncoderError::Unknown { id: config.encoder_id.clone(), registered: "hash-<d> (d > 0)".into() };
    let dim: usize = config
        .encoder_id
        .strip_prefix("hash-")
        .and_then(|d| d.parse().ok())
        .filter(|d| *d > 0)
        .ok_or_else(unknown)?;
    if config.fine_tune {
        return Err(EncoderError::NotTrainable(config.encoder_id.clone()));
    }
    Ok(Box::new(HashEncoder::new(dim)))
}

/// First eight bytes of the SHA-256 of a node key.
pub fn key_hash(key: &str) -> u64 {
    let digest = Sha256::digest(key.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Writes `(key hash, d little-endian f64)` records.
pub fn write_cache(path: &Path, dim: usize, records: &[(u64, Vec<f64>)]) -> Result<(), EncoderError> {
    let err = |message: String| EncoderError::Cache { path: path.display().to_string(), message };
    let mut buf = Vec::with_capacity(records.len() * (8 + 8 * dim));
    for (hash, v) in records {
        if v.len() != dim {
            return Err(err(format!("record has {} floats, expected {dim}", v.len())));
        }
        buf.extend_from_slice(&hash.to_le_bytes());
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| err(e.to_string()))?;
    f.write_all(&buf).map_err(|e| err(e.to_string()))
}

pub fn read_cache(path: &Path, dim: usize) -> Result<Vec<(u64, Vec<f64>)>, EncoderError> {
    let err = |message: String| EncoderError::Cache { path: path.display().to_string(), message };
    let bytes = fs::read(path).map_err(|e| err(e.to_string()))?;
    let record = 8 + 8 * dim;
    if bytes.len() % record != 0 {
        return Err(err(format!("{} bytes is not a multiple of the {record}-byte record", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(record)
        .map(|r| {
            let hash = u64::from_le_bytes(r[..8].try_into().expect("8 bytes"));
            let v = r[8..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            (hash, v)
        })
        .collect())
}
