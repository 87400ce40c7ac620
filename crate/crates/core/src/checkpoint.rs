//! Checkpoint plumbing shared by the pretraining module and experiment
//! models: weight arrays as base64 little-endian f64, versioned JSON
//! documents, content hashing, and atomic writes.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ehr::vocab::hex_string;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: &str = "mplite-ckpt-v1";

pub fn encode_f64s(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

pub fn decode_f64s(encoded: &str, expected_len: usize) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(encoded)
        .map_err(|e| Error::Checkpoint(format!("invalid base64 weight blob: {e}")))?;
    if bytes.len() != expected_len * 8 {
        return Err(Error::Checkpoint(format!(
            "weight blob has {} bytes, expected {}",
            bytes.len(),
            expected_len * 8
        )));
    }
    let mut out = Vec::with_capacity(expected_len);
    for chunk in bytes.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Checkpoint("non-finite weight in checkpoint".into()));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Serialize to pretty JSON and write atomically (temp file + rename), so
/// a crash never leaves a half-written artifact and reruns are
/// byte-identical.
pub fn write_json_atomic(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Checkpoint(format!("serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_bytes_atomic(path, &bytes)
}

pub fn write_bytes_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::Checkpoint(format!("parse {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_blob_round_trips_bitwise() {
        let values = vec![0.0, -1.5, std::f64::consts::PI, 1e-300, -0.0, 42.4242424242];
        let blob = encode_f64s(&values);
        let back = decode_f64s(&blob, values.len()).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn wrong_length_blob_is_rejected() {
        let blob = encode_f64s(&[1.0, 2.0]);
        assert!(decode_f64s(&blob, 3).is_err());
    }

    #[test]
    fn truncated_base64_is_rejected() {
        let blob = encode_f64s(&[1.0, 2.0]);
        assert!(decode_f64s(&blob[..blob.len() - 2], 2).is_err());
    }

    #[test]
    fn non_finite_weights_are_rejected() {
        let blob = encode_f64s(&[f64::NAN]);
        assert!(decode_f64s(&blob, 1).is_err());
    }

    #[test]
    fn atomic_write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        let value = serde_json::json!({"a": 1, "b": [1, 2, 3]});
        write_json_atomic(&path, &value).unwrap();
        let back: serde_json::Value = read_json(&path).unwrap();
        assert_eq!(value, back);
        assert!(!path.with_extension("tmp").exists());
    }

    #[test]
    fn repeated_writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        let value = serde_json::json!({"weights": encode_f64s(&[1.0, 2.5])});
        write_json_atomic(&path, &value).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_json_atomic(&path, &value).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
    }
}
