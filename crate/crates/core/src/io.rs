//! Little-endian f64 blobs with sha256 checksums, shared by every on-disk format.

use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

pub fn f64s_to_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn bytes_to_f64s(bytes: &[u8]) -> Option<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the blob and returns its checksum.
pub fn write_f64s(path: &Path, values: &[f64]) -> io::Result<String> {
    let bytes = f64s_to_bytes(values);
    fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}
