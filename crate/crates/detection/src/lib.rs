//! Detection backends and post-processing of their results.
//!
//! A backend turns a PNG snapshot into a list of [`Detection`]s. [`detect`]
//! wraps any backend with input checks, a timeout, output validation, score
//! filtering and a deterministic ordering. [`filter_and_label`] applies the
//! winning class to a scene object.

pub mod coco;
pub mod stub;

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use scenelab_core::{Scene, SceneError, SceneEvent};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use coco::{coco_label_set, COCO_LABELS};
pub use stub::{StubBackend, StubManifest};

/// Score cut-off for interactive classification.
pub const DEFAULT_MIN_SCORE: f64 = 0.5;
/// Score cut-off for benchmark runs, which keep low-confidence detections.
pub const BENCH_MIN_SCORE: f64 = 0.0;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("backend did not answer within {0:?}")]
    Timeout(Duration),
    #[error("malformed backend output: {0}")]
    BackendProtocol(String),
    #[error("min_score must be in [0, 1], got {0}")]
    InvalidMinScore(f64),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
}

/// One classified object: class, confidence, and a box in normalized image coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "class")]
    pub class_name: String,
    pub score: f64,
    /// `[x_min, y_min, x_max, y_max]`, each in `[0, 1]`.
    pub bbox: [f64; 4],
}

impl Detection {
    pub fn new(class_name: impl Into<String>, score: f64, bbox: [f64; 4]) -> Self {
        Detection {
            class_name: class_name.into(),
            score,
            bbox,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.class_name.is_empty() {
            return Err("empty class name".into());
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(format!("{}: score {} outside [0, 1]", self.class_name, self.score));
        }
        let [x0, y0, x1, y1] = self.bbox;
        if !self.bbox.iter().all(|c| (0.0..=1.0).contains(c)) || !(x0 < x1 && y0 < y1) {
            return Err(format!("{}: bad bbox {:?}", self.class_name, self.bbox));
        }
        Ok(())
    }
}

/// Descending score, then class name, then box. A total order on valid detections.
pub fn ranking(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.class_name.cmp(&b.class_name))
        .then_with(|| {
            a.bbox
                .iter()
                .zip(&b.bbox)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionBackendInfo {
    pub backend_id: String,
    pub label_set: Vec<String>,
    #[serde(default)]
    pub remote: bool,
}

impl DetectionBackendInfo {
    pub fn validate(&self) -> Result<(), String> {
        if self.backend_id.is_empty() {
            return Err("empty backend_id".into());
        }
        if self.label_set.is_empty() {
            return Err("empty label_set".into());
        }
        Ok(())
    }
}

#[async_trait]
pub trait DetectionBackend: Send + Sync {
    fn info(&self) -> &DetectionBackendInfo;

    /// Raw inference. Output is validated and ordered by [`detect`].
    async fn infer(&self, png: &[u8]) -> Result<Vec<Detection>, DetectionError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectOutcome {
    pub backend_id: String,
    pub detections: Vec<Detection>,
    pub latency_ms: u64,
    /// Backend round trip only, at full resolution.
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fully decodes `bytes` as PNG, returning the image size.
pub fn check_png(bytes: &[u8]) -> Result<(u32, u32), DetectionError> {
    let bad = |e: png::DecodingError| DetectionError::InvalidImage(e.to_string());
    let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info().map_err(bad)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| DetectionError::InvalidImage("image too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(bad)?;
    Ok((frame.width, frame.height))
}

/// Runs `backend` on a PNG and returns the detections scoring at least
/// `min_score`, best first.
pub async fn detect(
    backend: &dyn DetectionBackend,
    png: &[u8],
    min_score: f64,
    timeout: Duration,
) -> Result<DetectOutcome, DetectionError> {
    if !(0.0..=1.0).contains(&min_score) {
        return Err(DetectionError::InvalidMinScore(min_score));
    }
    check_png(png)?;
    let info = backend.info();
    let started = Instant::now();
    let raw = tokio::time::timeout(timeout, backend.infer(png))
        .await
        .map_err(|_| DetectionError::Timeout(timeout))??;
    let elapsed = started.elapsed();

    for d in &raw {
        d.validate().map_err(DetectionError::BackendProtocol)?;
        if !info.label_set.contains(&d.class_name) {
            return Err(DetectionError::BackendProtocol(format!(
                "class `{}` not in the label set of `{}`",
                d.class_name, info.backend_id
            )));
        }
    }
    let mut detections: Vec<Detection> = raw.into_iter().filter(|d| d.score >= min_score).collect();
    detections.sort_by(ranking);
    Ok(DetectOutcome {
        backend_id: info.backend_id.clone(),
        detections,
        latency_ms: elapsed.as_millis() as u64,
        elapsed,
    })
}

/// Result of applying detections to an object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum LabelOutcome {
    Labeled { event: SceneEvent },
    /// Nothing detected; the label is left as it was.
    NoDetection { object_id: String, warning: String },
}

pub const NO_DETECTION_WARNING: &str = "no objects identified in the submitted image";

/// Highest score wins; on equal scores the lexicographically smaller class.
pub fn top_detection(detections: &[Detection]) -> Option<&Detection> {
    detections.iter().min_by(|a, b| ranking(a, b))
}

pub fn filter_and_label(scene: &mut Scene, object_id: &str, detections: &[Detection]) -> Result<LabelOutcome, SceneError> {
    scene.object(object_id)?;
    match top_detection(detections) {
        Some(top) => {
            let event = scene.set_label(object_id, Some(top.class_name.clone()))?;
            Ok(LabelOutcome::Labeled { event })
        }
        None => Ok(LabelOutcome::NoDetection {
            object_id: object_id.to_owned(),
            warning: NO_DETECTION_WARNING.into(),
        }),
    }
}
