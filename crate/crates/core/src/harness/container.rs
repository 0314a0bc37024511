//! Checksummed binary container shared by weight archives and image dumps:
//! 8-byte magic, u32 LE version, u32 LE header length, JSON header,
//! sha256(header ‖ payload), payload.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub(crate) fn encode(magic: &[u8; 8], version: u32, header: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(48 + header.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(&digest(header, payload));
    out.extend_from_slice(payload);
    out
}

/// Splits a container into `(header, payload)` after checking magic, version and checksum.
pub(crate) fn decode<'a>(
    magic: &[u8; 8],
    version: u32,
    bytes: &'a [u8],
    what: &str,
) -> Result<(&'a [u8], &'a [u8])> {
    if bytes.len() < 16 || &bytes[..8] != magic {
        return Err(Error::Format(format!("{what}: bad magic")));
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if found != version {
        return Err(Error::Format(format!("{what}: version {found}, expected {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() < hlen + 32 {
        return Err(Error::Format(format!("{what}: truncated header")));
    }
    let header = &body[..hlen];
    let sum = &body[hlen..hlen + 32];
    let payload = &body[hlen + 32..];
    if digest(header, payload)[..] != sum[..] {
        return Err(Error::ChecksumMismatch(what.to_string()));
    }
    Ok((header, payload))
}

fn digest(header: &[u8], payload: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(header);
    h.update(payload);
    h.finalize().into()
}

pub(crate) fn f32_bytes<'a>(values: impl IntoIterator<Item = &'a f32>, out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn read_f32(payload: &[u8], offset: &mut usize, n: usize, what: &str) -> Result<Vec<f32>> {
    let end = *offset + 4 * n;
    if end > payload.len() {
        return Err(Error::Format(format!("{what}: payload too short")));
    }
    let v = payload[*offset..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    *offset = end;
    Ok(v)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
