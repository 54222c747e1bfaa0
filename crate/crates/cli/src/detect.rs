use anyhow::Context;
use scenelab_detection::{detect as run_detect, StubBackend, StubManifest, DEFAULT_TIMEOUT, NO_DETECTION_WARNING};

use crate::args::DetectArgs;

pub async fn detect(a: DetectArgs) -> anyhow::Result<()> {
    let manifest = StubManifest::load(&a.manifest)?;
    let image = std::fs::read(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let backend = StubBackend::new(manifest);
    let out = run_detect(&backend, &image, a.min_score, DEFAULT_TIMEOUT).await?;
    if out.detections.is_empty() {
        eprintln!("warning: {NO_DETECTION_WARNING}");
    }
    for d in &out.detections {
        let [x0, y0, x1, y1] = d.bbox;
        println!("{} {} [{x0} {y0} {x1} {y1}]", d.class_name, d.score);
    }
    Ok(())
}
