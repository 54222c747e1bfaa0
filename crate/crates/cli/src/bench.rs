use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use scenelab_bench::{
    build_report, per_object_report, render_report_json, render_report_text, render_table_i, render_table_ii, run_corpus,
    run_objects, BenchOptions, BenchReport, BenchResults, GroundTruth, TableIRow,
};
use scenelab_detection::{StubBackend, StubManifest};

use crate::args::{BackendKind, BenchArgs, Format};

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_outputs(dir: &Path, files: &[(&str, &str)]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn backend(a: &BenchArgs) -> anyhow::Result<StubBackend> {
    match a.backend {
        BackendKind::Stub => {
            let path = a.manifest.as_deref().context("--manifest is required for the stub backend")?;
            let b = StubBackend::new(StubManifest::load(path)?);
            Ok(match &a.name {
                Some(n) => b.with_id(n.clone()),
                None => b,
            })
        }
    }
}

pub async fn bench(a: BenchArgs) -> anyhow::Result<()> {
    if !a.compare.is_empty() {
        return compare(&a);
    }
    if let Some(objects) = &a.objects {
        return objects_table(&a, objects).await;
    }
    let truth_path = a.truth.as_deref().context("--truth is required")?;
    let truth = GroundTruth::load(truth_path)?;
    let mut results = match &a.from_results {
        Some(path) => BenchResults::from_json(&read(path)?)?,
        None => {
            let corpus = a.corpus.as_deref().context("--corpus is required")?;
            let opts = BenchOptions {
                min_score: a.min_score,
                timeout: Duration::from_secs_f64(a.timeout),
                parallelism: a.parallelism as usize,
                subset: a.subset,
                seed: a.seed,
            };
            run_corpus(&backend(&a)?, corpus, &truth, &opts).await?
        }
    };
    if let (Some(name), Some(_)) = (&a.name, &a.from_results) {
        results.backend_id = name.clone();
    }
    let failed = results.images.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        tracing::warn!(failed, "some images could not be processed; see results.json");
    }
    let report = build_report(&results, &truth, a.accuracy.into())?;
    let (text, json) = (render_report_text(&report), render_report_json(&report));
    if let Some(dir) = &a.out {
        write_outputs(
            dir,
            &[("report.txt", &text), ("report.json", &json), ("results.json", &results.to_json())],
        )?;
    }
    print!("{}", if a.format == Format::Json { &json } else { &text });
    Ok(())
}

fn compare(a: &BenchArgs) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for path in &a.compare {
        let report: BenchReport =
            serde_json::from_str(&read(path)?).with_context(|| format!("parsing report {}", path.display()))?;
        rows.push(TableIRow::from(&report));
    }
    let text = render_table_i(&rows);
    let json = serde_json::to_string_pretty(&rows)? + "\n";
    if let Some(dir) = &a.out {
        write_outputs(dir, &[("table.txt", &text), ("table.json", &json)])?;
    }
    print!("{}", if a.format == Format::Json { &json } else { &text });
    Ok(())
}

async fn objects_table(a: &BenchArgs, file: &Path) -> anyhow::Result<()> {
    let spec: BTreeMap<String, PathBuf> =
        serde_json::from_str(&read(file)?).with_context(|| format!("parsing {}", file.display()))?;
    let base = file.parent().unwrap_or(Path::new("."));
    let crops: BTreeMap<String, PathBuf> = spec.into_iter().map(|(t, p)| (t, base.join(p))).collect();
    let opts = BenchOptions {
        min_score: a.min_score,
        timeout: Duration::from_secs_f64(a.timeout),
        ..BenchOptions::default()
    };
    let result = run_objects(&backend(a)?, &crops, &opts).await?;
    let targets: Vec<String> = crops.keys().cloned().collect();
    let table = per_object_report(std::slice::from_ref(&result), &targets);
    let text = render_table_ii(&table);
    let json = serde_json::to_string_pretty(&table)? + "\n";
    if let Some(dir) = &a.out {
        write_outputs(
            dir,
            &[("objects.txt", &text), ("objects.json", &json), ("detections.json", &(serde_json::to_string_pretty(&result)? + "\n"))],
        )?;
    }
    print!("{}", if a.format == Format::Json { &json } else { &text });
    Ok(())
}
