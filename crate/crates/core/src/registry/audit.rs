//! Append-only audit trail, one JSON object per line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::sim::IQFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    /// Wall-clock milliseconds since the Unix epoch.
    pub time_ms: u128,
    pub event: String,
    pub device_id: Option<u16>,
    pub matched_id: Option<u16>,
    pub verdict: Option<String>,
    pub score: Option<f64>,
    pub threshold: Option<f64>,
    /// SHA-256 over the inputs' sample bytes, hex.
    pub input_sha256: String,
}

impl AuditEvent {
    pub fn new(event: &str, input_sha256: String) -> Self {
        AuditEvent {
            time_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            event: event.into(),
            device_id: None,
            matched_id: None,
            verdict: None,
            score: None,
            threshold: None,
            input_sha256,
        }
    }
}

/// SHA-256 of the frames' samples as interleaved f64 LE.
pub fn hash_frames<'a>(frames: impl IntoIterator<Item = &'a IQFrame>) -> String {
    let mut h = Sha256::new();
    for f in frames {
        for s in &f.samples {
            h.update(s.re.to_le_bytes());
            h.update(s.im.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of f64 vectors, LE.
pub fn hash_vectors<'a>(vs: impl IntoIterator<Item = &'a Vec<f64>>) -> String {
    let mut h = Sha256::new();
    for v in vs {
        for x in v {
            h.update(x.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditLog {
    path: PathBuf,
}

impl AuditLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        AuditLog { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one line; existing content is never rewritten.
    pub fn append(&self, e: &AuditEvent) -> Result<()> {
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let mut line = serde_json::to_string(e)?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
        Ok(())
    }

    pub fn read(&self) -> Result<Vec<AuditEvent>> {
        let text = match std::fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        text.lines().map(|l| Ok(serde_json::from_str(l)?)).collect()
    }
}
