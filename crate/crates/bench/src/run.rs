//! Running a backend over a corpus. Produces cached [`BenchResults`] that
//! the report is computed from.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use futures::stream::{self, StreamExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scenelab_detection::{detect, Detection, DetectionBackend, BENCH_MIN_SCORE, DEFAULT_TIMEOUT};
use serde::{Deserialize, Serialize};

use crate::report::BackendObjects;
use crate::truth::{normalize_key, GroundTruth};
use crate::BenchError;

const IMAGE_EXTENSIONS: [&str; 1] = ["png"];

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub min_score: f64,
    pub timeout: Duration,
    /// Images in flight at once.
    pub parallelism: usize,
    /// Evaluate a seeded random subset of this many images.
    pub subset: Option<usize>,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            min_score: BENCH_MIN_SCORE,
            timeout: DEFAULT_TIMEOUT,
            parallelism: 1,
            subset: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub image: String,
    pub detections: Vec<Detection>,
    /// Backend round trip in seconds.
    pub elapsed_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Raw per-image output of one run, sorted by image path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResults {
    pub backend_id: String,
    pub min_score: f64,
    pub images: Vec<ImageResult>,
}

impl BenchResults {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Results(e.to_string()))
    }
}

/// Every image file under `dir`, as sorted corpus-relative keys.
pub fn scan_corpus(dir: &Path) -> Result<Vec<String>, BenchError> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), BenchError> {
        let io = |e| BenchError::Io(dir.display().to_string(), e);
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let entry = entry.map_err(io)?;
            let path = entry.path();
            if entry.file_type().map_err(io)?.is_dir() {
                walk(root, &path, out)?;
            } else if path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            {
                let rel = path.strip_prefix(root).unwrap_or(&path);
                out.push(normalize_key(&rel.to_string_lossy()));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

/// `n` images picked with a seeded generator, returned sorted. The whole
/// list when `n` is not smaller.
pub fn select_subset(images: &[String], n: usize, seed: u64) -> Vec<String> {
    if n >= images.len() {
        return images.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<String> = images.choose_multiple(&mut rng, n).cloned().collect();
    picked.sort();
    picked
}

/// Runs `backend` on each corpus image covered by `truth`. Per-image
/// failures are recorded in the results rather than aborting the run.
pub async fn run_corpus(
    backend: &dyn DetectionBackend,
    corpus: &Path,
    truth: &GroundTruth,
    opts: &BenchOptions,
) -> Result<BenchResults, BenchError> {
    let mut images = scan_corpus(corpus)?;
    if let Some(n) = opts.subset {
        images = select_subset(&images, n, opts.seed);
    }
    if images.is_empty() {
        return Err(BenchError::EmptyCorpus);
    }
    let missing: Vec<String> = images.iter().filter(|i| !truth.contains(i)).cloned().collect();
    if !missing.is_empty() {
        return Err(BenchError::MissingGroundTruth(missing));
    }
    let labels = &backend.info().label_set;
    for class in truth.all_classes() {
        if !labels.iter().any(|l| l == class) {
            return Err(BenchError::UnknownClass(class.to_owned()));
        }
    }
    if !(0.0..=1.0).contains(&opts.min_score) {
        return Err(BenchError::InvalidOption(format!("min score {} outside [0, 1]", opts.min_score)));
    }

    let results: Vec<ImageResult> = stream::iter(images)
        .map(|image| async move {
            let path = corpus.join(&image);
            match tokio::fs::read(&path).await {
                Ok(bytes) => run_one(backend, image, &bytes, opts).await,
                Err(e) => ImageResult {
                    image,
                    detections: Vec::new(),
                    elapsed_s: 0.0,
                    error: Some(format!("cannot read {}: {e}", path.display())),
                },
            }
        })
        .buffer_unordered(opts.parallelism.max(1))
        .collect()
        .await;
    let mut results = results;
    results.sort_by(|a, b| a.image.cmp(&b.image));
    Ok(BenchResults {
        backend_id: backend.info().backend_id.clone(),
        min_score: opts.min_score,
        images: results,
    })
}

async fn run_one(backend: &dyn DetectionBackend, image: String, png: &[u8], opts: &BenchOptions) -> ImageResult {
    match detect(backend, png, opts.min_score, opts.timeout).await {
        Ok(out) => ImageResult {
            image,
            detections: out.detections,
            elapsed_s: out.elapsed.as_secs_f64(),
            error: None,
        },
        Err(e) => ImageResult {
            image,
            detections: Vec::new(),
            elapsed_s: 0.0,
            error: Some(e.to_string()),
        },
    }
}

/// Classifies one crop per target object, for the per-object table.
/// A crop that fails counts as nothing detected.
pub async fn run_objects(
    backend: &dyn DetectionBackend,
    crops: &BTreeMap<String, PathBuf>,
    opts: &BenchOptions,
) -> Result<BackendObjects, BenchError> {
    let mut out = BTreeMap::new();
    for (target, path) in crops {
        let bytes = tokio::fs::read(path)
            .await
            .map_err(|e| BenchError::Io(path.display().to_string(), e))?;
        let detections = detect(backend, &bytes, opts.min_score, opts.timeout)
            .await
            .map(|o| o.detections)
            .unwrap_or_default();
        out.insert(target.clone(), detections);
    }
    Ok(BackendObjects {
        backend: backend.info().backend_id.clone(),
        crops: out,
    })
}
