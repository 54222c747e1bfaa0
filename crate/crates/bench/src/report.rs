//! Report assembly and the two table layouts. Everything here is a pure
//! function of cached results, so re-rendering is byte-identical.

use std::collections::BTreeMap;
use std::fmt;

use scenelab_detection::{ranking, Detection};
use serde::{Deserialize, Serialize};

use crate::run::BenchResults;
use crate::truth::GroundTruth;
use crate::BenchError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyMode {
    /// Correct detections over all detections.
    #[default]
    PerDetection,
    /// Mean of the per-image ratio, over images with at least one detection.
    PerImage,
}

/// One table cell: a hit with its best score, nothing detected, or a
/// different class predicted on top.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cell {
    Hit { score: f64 },
    Miss,
    Mislabel { predicted: String, score: f64 },
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Hit { score } => f.write_str(&format_score_pct(*score)),
            Cell::Miss => f.write_str("X"),
            Cell::Mislabel { predicted, score } => write!(f, "{} ({predicted})", format_score_pct(*score)),
        }
    }
}

/// Score as a percentage to two decimals, dropping `.00`: 0.989 → "98.90", 0.91 → "91".
pub fn format_score_pct(score: f64) -> String {
    let hundredths = (score * 10_000.0).round() as i64;
    if hundredths % 100 == 0 {
        format!("{}", hundredths / 100)
    } else {
        format!("{}.{:02}", hundredths / 100, hundredths % 100)
    }
}

fn trimmed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// One decimal at most: 66.666 → "66.7", 72.0 → "72", undefined → "-".
pub fn format_accuracy(pct: Option<f64>) -> String {
    pct.map_or_else(|| "-".into(), |p| trimmed(p, 1))
}

/// Whole percent, as in the comparison table: 72.02 → "72".
pub fn format_accuracy_whole(pct: Option<f64>) -> String {
    pct.map_or_else(|| "-".into(), |p| trimmed(p, 0))
}

/// Millisecond resolution at most: 1080.0 → "1080", 0.0125 → "0.013".
pub fn format_seconds(s: f64) -> String {
    trimmed(s, 3)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub backend_id: String,
    pub min_score: f64,
    pub n_images: usize,
    pub failed_images: usize,
    pub detected_objects: usize,
    pub correct_detections: usize,
    pub accuracy_mode: AccuracyMode,
    /// Undefined when nothing was detected.
    pub accuracy_pct: Option<f64>,
    /// Mean backend time per successfully processed image.
    pub avg_time_s: f64,
    pub total_time_s: f64,
    pub per_class: BTreeMap<String, Cell>,
}

/// Aggregates cached results against `truth`.
pub fn build_report(results: &BenchResults, truth: &GroundTruth, mode: AccuracyMode) -> Result<BenchReport, BenchError> {
    if results.images.is_empty() {
        return Err(BenchError::EmptyCorpus);
    }
    let missing: Vec<String> = results
        .images
        .iter()
        .filter(|r| !truth.contains(&r.image))
        .map(|r| r.image.clone())
        .collect();
    if !missing.is_empty() {
        return Err(BenchError::MissingGroundTruth(missing));
    }

    let mut detected = 0;
    let mut correct = 0;
    let mut ratios = Vec::new();
    let mut total_time = 0.0;
    let mut ok_images = 0;
    for r in &results.images {
        let expected = truth.classes(&r.image).unwrap_or_default();
        let hits = r.detections.iter().filter(|d| expected.contains(d.class_name.as_str())).count();
        detected += r.detections.len();
        correct += hits;
        if !r.detections.is_empty() {
            ratios.push(hits as f64 / r.detections.len() as f64);
        }
        if r.error.is_none() {
            ok_images += 1;
            total_time += r.elapsed_s;
        }
    }
    let accuracy_pct = match mode {
        _ if detected == 0 => None,
        AccuracyMode::PerDetection => Some(100.0 * correct as f64 / detected as f64),
        AccuracyMode::PerImage => Some(100.0 * ratios.iter().sum::<f64>() / ratios.len() as f64),
    };

    let mut per_class = BTreeMap::new();
    for class in truth_classes(results, truth) {
        per_class.insert(class.clone(), class_cell(results, truth, &class));
    }

    Ok(BenchReport {
        backend_id: results.backend_id.clone(),
        min_score: results.min_score,
        n_images: results.images.len(),
        failed_images: results.images.len() - ok_images,
        detected_objects: detected,
        correct_detections: correct,
        accuracy_mode: mode,
        accuracy_pct,
        avg_time_s: if ok_images == 0 { 0.0 } else { total_time / ok_images as f64 },
        total_time_s: total_time,
        per_class,
    })
}

fn truth_classes(results: &BenchResults, truth: &GroundTruth) -> Vec<String> {
    let mut all: Vec<String> = results
        .images
        .iter()
        .flat_map(|r| truth.classes(&r.image).unwrap_or_default())
        .map(str::to_owned)
        .collect();
    all.sort();
    all.dedup();
    all
}

/// Over images expecting `class`: best score of that class if detected,
/// else the top wrong prediction on those images, else a miss.
fn class_cell(results: &BenchResults, truth: &GroundTruth, class: &str) -> Cell {
    let mut best: Option<f64> = None;
    let mut wrong: Vec<&Detection> = Vec::new();
    for r in &results.images {
        let expected = truth.classes(&r.image).unwrap_or_default();
        if !expected.contains(class) {
            continue;
        }
        for d in &r.detections {
            if d.class_name == class {
                best = Some(best.map_or(d.score, |b: f64| b.max(d.score)));
            } else if !expected.contains(d.class_name.as_str()) {
                wrong.push(d);
            }
        }
    }
    if let Some(score) = best {
        return Cell::Hit { score };
    }
    match wrong.into_iter().min_by(|a, b| ranking(a, b)) {
        Some(d) => Cell::Mislabel {
            predicted: d.class_name.clone(),
            score: d.score,
        },
        None => Cell::Miss,
    }
}

/// One line of the detector comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableIRow {
    pub model: String,
    pub detected_objects: usize,
    pub accuracy_pct: Option<f64>,
    pub avg_time_s: f64,
}

impl From<&BenchReport> for TableIRow {
    fn from(r: &BenchReport) -> Self {
        TableIRow {
            model: r.backend_id.clone(),
            detected_objects: r.detected_objects,
            accuracy_pct: r.accuracy_pct,
            avg_time_s: r.avg_time_s,
        }
    }
}

pub const TABLE_I_HEADER: [&str; 4] = ["Model", "#Detected Object", "Accuracy (%)", "Avg Computational Time (sec)"];

fn render_grid(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            if c + 1 < row.len() {
                line.extend(std::iter::repeat_n(' ', widths[c] - cell.chars().count()));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Aligned text: header, then one row per model. Accuracy is whole percent.
pub fn render_table_i(rows: &[TableIRow]) -> String {
    let mut grid = vec![TABLE_I_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for r in rows {
        grid.push(vec![
            r.model.clone(),
            r.detected_objects.to_string(),
            format_accuracy_whole(r.accuracy_pct),
            format_seconds(r.avg_time_s),
        ]);
    }
    render_grid(&grid)
}

/// Per-object detections from one backend: target object → detections on its crop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BackendObjects {
    pub backend: String,
    pub crops: BTreeMap<String, Vec<Detection>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRow {
    pub target: String,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectTable {
    pub backends: Vec<String>,
    pub rows: Vec<ObjectRow>,
}

/// The cell for one crop: decided by the top-ranked detection.
pub fn object_cell(target: &str, detections: &[Detection]) -> Cell {
    match detections.iter().min_by(|a, b| ranking(a, b)) {
        None => Cell::Miss,
        Some(top) if top.class_name == target => Cell::Hit { score: top.score },
        Some(top) => Cell::Mislabel {
            predicted: top.class_name.clone(),
            score: top.score,
        },
    }
}

/// Rows follow `targets`, columns follow `results`.
pub fn per_object_report(results: &[BackendObjects], targets: &[String]) -> ObjectTable {
    ObjectTable {
        backends: results.iter().map(|b| b.backend.clone()).collect(),
        rows: targets
            .iter()
            .map(|t| ObjectRow {
                target: t.clone(),
                cells: results
                    .iter()
                    .map(|b| object_cell(t, b.crops.get(t).map(Vec::as_slice).unwrap_or_default()))
                    .collect(),
            })
            .collect(),
    }
}

pub fn render_table_ii(table: &ObjectTable) -> String {
    let mut grid = vec![std::iter::once("Object".to_owned()).chain(table.backends.iter().cloned()).collect()];
    for row in &table.rows {
        grid.push(
            std::iter::once(row.target.clone())
                .chain(row.cells.iter().map(Cell::to_string))
                .collect(),
        );
    }
    render_grid(&grid)
}

/// Plain-text report: the comparison row, run totals, and per-class cells.
pub fn render_report_text(r: &BenchReport) -> String {
    let mut out = render_table_i(&[TableIRow::from(r)]);
    out.push('\n');
    out.push_str(&format!(
        "images: {} ({} failed)\ncorrect detections: {}\naccuracy (%): {}\naccuracy mode: {}\nmin score: {}\ntotal time (sec): {}\n",
        r.n_images,
        r.failed_images,
        r.correct_detections,
        format_accuracy(r.accuracy_pct),
        match r.accuracy_mode {
            AccuracyMode::PerDetection => "per-detection",
            AccuracyMode::PerImage => "per-image",
        },
        r.min_score,
        format_seconds(r.total_time_s),
    ));
    if !r.per_class.is_empty() {
        out.push('\n');
        let mut grid = vec![vec!["Class".to_owned(), r.backend_id.clone()]];
        grid.extend(r.per_class.iter().map(|(c, cell)| vec![c.clone(), cell.to_string()]));
        out.push_str(&render_grid(&grid));
    }
    out
}

pub fn render_report_json(r: &BenchReport) -> String {
    serde_json::to_string_pretty(r).expect("report serializes") + "\n"
}
