//! Single-file snapshots of frozen graphs and KBs.
//!
//! Layout: a version line, a header line with kind, payload byte length and
//! SHA-256, then the JSON payload. A reader never returns a partial value.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::DiscourseGraph;
use crate::kb::SeedKb;

pub const SNAPSHOT_VERSION: &str = "ckgp-snapshot-v1";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("snapshot version `{found}` is not readable by this build (expected `{SNAPSHOT_VERSION}`)")]
    Version { found: String },
    #[error("snapshot holds a `{found}`, expected a `{expected}`")]
    Kind { expected: &'static str, found: String },
    #[error("snapshot integrity check failed: {0}")]
    Integrity(String),
}

/// Types that can be written to and restored from a snapshot file.
pub trait Snapshot: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

impl Snapshot for DiscourseGraph {
    const KIND: &'static str = "discourse-graph";
}

impl Snapshot for SeedKb {
    const KIND: &'static str = "seed-kb";
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn store<T: Snapshot>(value: &T, path: &Path) -> Result<(), SnapshotError> {
    let io_err = |source| SnapshotError::Io { path: path.display().to_string(), source };
    let payload = serde_json::to_vec(value).map_err(|e| SnapshotError::Integrity(e.to_string()))?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        writeln!(f, "{SNAPSHOT_VERSION}").map_err(io_err)?;
        writeln!(f, "kind={} bytes={} sha256={}", T::KIND, payload.len(), sha256_hex(&payload)).map_err(io_err)?;
        f.write_all(&payload).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn load<T: Snapshot>(path: &Path) -> Result<T, SnapshotError> {
    let bytes = fs::read(path).map_err(|source| SnapshotError::Io { path: path.display().to_string(), source })?;
    let (version, rest) = split_line(&bytes).ok_or_else(|| SnapshotError::Integrity("missing version line".into()))?;
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::Version { found: version.to_string() });
    }
    let (header, payload) = split_line(rest).ok_or_else(|| SnapshotError::Integrity("missing header line".into()))?;
    let mut kind = None;
    let mut len = None;
    let mut digest = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("kind", v)) => kind = Some(v.to_string()),
            Some(("bytes", v)) => len = v.parse::<usize>().ok(),
            Some(("sha256", v)) => digest = Some(v.to_string()),
            _ => {}
        }
    }
    let (kind, len, digest) = match (kind, len, digest) {
        (Some(k), Some(l), Some(d)) => (k, l, d),
        _ => return Err(SnapshotError::Integrity(format!("malformed header `{header}`"))),
    };
    if kind != T::KIND {
        return Err(SnapshotError::Kind { expected: T::KIND, found: kind });
    }
    if payload.len() != len {
        return Err(SnapshotError::Integrity(format!("payload is {} bytes, header says {len}", payload.len())));
    }
    if sha256_hex(payload) != digest {
        return Err(SnapshotError::Integrity("payload digest mismatch".into()));
    }
    serde_json::from_slice(payload).map_err(|e| SnapshotError::Integrity(e.to_string()))
}

fn split_line(bytes: &[u8]) -> Option<(&str, &[u8])> {
    let pos = bytes.iter().position(|&b| b == b'\n')?;
    let line = std::str::from_utf8(&bytes[..pos]).ok()?;
    Some((line, &bytes[pos + 1..]))
}
