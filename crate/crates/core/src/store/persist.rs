//! Workspace files: one JSON header line followed by the JSON payload.
//!
//! ```text
//! {"format":"rpys-workspace","version":1,"sha256":"<hex digest of payload>"}
//! {...payload...}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Workspace;
use crate::{Error, Result};

pub const WORKSPACE_FORMAT: &str = "rpys-workspace";
pub const WORKSPACE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    sha256: String,
}

fn digest(payload: &[u8]) -> String {
    Sha256::digest(payload)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn encode_workspace(ws: &Workspace) -> Vec<u8> {
    let payload = serde_json::to_vec(ws).expect("workspace serializes to json");
    let header = Header {
        format: WORKSPACE_FORMAT.into(),
        version: WORKSPACE_VERSION,
        sha256: digest(&payload),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes to json");
    out.push(b'\n');
    out.extend_from_slice(&payload);
    out.push(b'\n');
    out
}

/// Decodes a workspace file. Nothing is returned unless the header, the
/// checksum and the workspace invariants all check out.
pub fn decode_workspace(bytes: &[u8]) -> Result<Workspace> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Integrity("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Integrity(format!("unreadable header: {e}")))?;
    if header.format != WORKSPACE_FORMAT {
        return Err(Error::Integrity(format!(
            "not a workspace file (format `{}`)",
            header.format
        )));
    }
    if header.version != WORKSPACE_VERSION {
        return Err(Error::UnsupportedVersion {
            found: header.version,
            supported: WORKSPACE_VERSION,
        });
    }
    let body = &bytes[newline + 1..];
    let payload = body.strip_suffix(b"\n").unwrap_or(body);
    if digest(payload) != header.sha256 {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let ws: Workspace = serde_json::from_slice(payload)
        .map_err(|e| Error::Integrity(format!("unreadable payload: {e}")))?;
    ws.validate().map_err(|e| Error::Integrity(e.to_string()))?;
    Ok(ws)
}

/// True when the bytes start like a workspace file rather than an export.
pub fn looks_like_workspace(bytes: &[u8]) -> bool {
    bytes.starts_with(b"{\"format\":\"rpys-workspace\"")
}

pub fn save_workspace(ws: &Workspace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_workspace(ws)).map_err(|e| Error::io(path, e))
}

pub fn load_workspace(path: impl AsRef<Path>) -> Result<Workspace> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_workspace(&bytes)
}
