//! Deterministic stand-in for a neural detector: answers by image hash.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::{coco_label_set, sha256_hex, Detection, DetectionBackend, DetectionBackendInfo, DetectionError};

/// Image hash (64 lowercase hex chars) to the detections the stub returns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StubManifest {
    pub entries: BTreeMap<String, Vec<Detection>>,
}

fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl StubManifest {
    pub fn from_json(text: &str) -> Result<Self, DetectionError> {
        let m: StubManifest = serde_json::from_str(text).map_err(|e| DetectionError::InvalidManifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, DetectionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DetectionError::InvalidManifest(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        for (hash, dets) in &self.entries {
            if !is_sha256_hex(hash) {
                return Err(DetectionError::InvalidManifest(format!("`{hash}` is not a lowercase SHA-256 hex digest")));
            }
            for d in dets {
                d.validate().map_err(|e| DetectionError::InvalidManifest(format!("{hash}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Registers the answer for an image's exact bytes.
    pub fn insert(&mut self, image: &[u8], detections: Vec<Detection>) {
        self.entries.insert(sha256_hex(image), detections);
    }

    pub fn lookup(&self, image: &[u8]) -> Option<&[Detection]> {
        self.entries.get(&sha256_hex(image)).map(Vec::as_slice)
    }

    /// Every class named in the manifest.
    pub fn classes(&self) -> BTreeSet<String> {
        self.entries.values().flatten().map(|d| d.class_name.clone()).collect()
    }
}

#[derive(Debug)]
pub struct StubBackend {
    info: DetectionBackendInfo,
    manifest: StubManifest,
    delay: Option<Duration>,
}

impl StubBackend {
    /// Label set is COCO-80 plus any extra class the manifest mentions.
    pub fn new(manifest: StubManifest) -> Self {
        let mut labels = coco_label_set();
        for c in manifest.classes() {
            if !labels.contains(&c) {
                labels.push(c);
            }
        }
        StubBackend {
            info: DetectionBackendInfo {
                backend_id: "stub".into(),
                label_set: labels,
                remote: false,
            },
            manifest,
            delay: None,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.info.backend_id = id.into();
        self
    }

    /// Sleeps before answering, to simulate a slow model.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn manifest(&self) -> &StubManifest {
        &self.manifest
    }
}

#[async_trait]
impl DetectionBackend for StubBackend {
    fn info(&self) -> &DetectionBackendInfo {
        &self.info
    }

    async fn infer(&self, png: &[u8]) -> Result<Vec<Detection>, DetectionError> {
        if let Some(d) = self.delay {
            tokio::time::sleep(d).await;
        }
        Ok(self.manifest.lookup(png).map(<[Detection]>::to_vec).unwrap_or_default())
    }
}
