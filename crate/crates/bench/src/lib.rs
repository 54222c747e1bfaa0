//! Detection benchmark: run a backend over an image corpus with ground
//! truth, then report detected-object counts, accuracy and timing as a
//! model comparison row, plus a per-object table across backends.

pub mod report;
pub mod run;
pub mod truth;

use thiserror::Error;

pub use report::{
    build_report, format_accuracy, format_accuracy_whole, format_score_pct, format_seconds, object_cell, per_object_report,
    render_report_json, render_report_text, render_table_i, render_table_ii, AccuracyMode, BackendObjects,
    BenchReport, Cell, ObjectRow, ObjectTable, TableIRow,
};
pub use run::{run_corpus, run_objects, scan_corpus, select_subset, BenchOptions, BenchResults, ImageResult};
pub use truth::{GroundTruth, TruthItem};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("the corpus has no images")]
    EmptyCorpus,
    #[error("no ground truth for {} image(s): {}", .0.len(), .0.join(", "))]
    MissingGroundTruth(Vec<String>),
    #[error("ground-truth class `{0}` is not in the backend's label set")]
    UnknownClass(String),
    #[error("invalid ground truth: {0}")]
    Truth(String),
    #[error("invalid results file: {0}")]
    Results(String),
    #[error("{0}")]
    InvalidOption(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// Runs the corpus and builds the report in one step.
pub async fn run_benchmark(
    backend: &dyn scenelab_detection::DetectionBackend,
    corpus: &std::path::Path,
    truth: &GroundTruth,
    opts: &BenchOptions,
    mode: AccuracyMode,
) -> Result<(BenchResults, BenchReport), BenchError> {
    let results = run_corpus(backend, corpus, truth, opts).await?;
    let report = build_report(&results, truth, mode)?;
    Ok((results, report))
}
