//! Run manifests: input hash, emitted artifacts, and per-stage timings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub input_sha256: String,
    pub artifacts: Vec<String>,
    pub timings_seconds: BTreeMap<String, f64>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(config_bytes: &[u8]) -> Self {
        Self {
            input_sha256: sha256_hex(config_bytes),
            artifacts: Vec::new(),
            timings_seconds: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn add_artifact(&mut self, path: &str) {
        self.artifacts.push(path.to_string());
    }

    pub fn add_timing(&mut self, stage: &str, seconds: f64) {
        self.timings_seconds.insert(stage.to_string(), seconds);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_changes_iff_content_changes() {
        let a = RunManifest::new(b"{\"epsilon\":0.3}");
        let b = RunManifest::new(b"{\"epsilon\":0.3}");
        let c = RunManifest::new(b"{\"epsilon\":0.25}");
        assert_eq!(a.input_sha256, b.input_sha256);
        assert_ne!(a.input_sha256, c.input_sha256);
    }
}
