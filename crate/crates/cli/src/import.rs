use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context};
use scenelab_core::load_scene_with_id;

use crate::args::ImportArgs;

pub fn import_scene(a: ImportArgs) -> anyhow::Result<()> {
    let scene = load_scene_with_id(&a.file, &a.id, a.unit_scale)?;
    println!("scene {}: {} objects (unit scale {})", scene.scene_id(), scene.objects().len(), a.unit_scale);
    for o in scene.objects() {
        println!(
            "  {}  {} vertices  {} triangles",
            o.id(),
            o.mesh().vertex_count(),
            o.mesh().triangle_count()
        );
    }
    if a.install {
        let assets = a.assets.as_deref().expect("clap requires --assets with --install");
        let dir = install(&a.file, assets, &a.id, a.unit_scale, a.force)?;
        println!("installed to {}", dir.display());
    }
    Ok(())
}

fn install(file: &Path, assets: &Path, id: &str, unit_scale: f64, force: bool) -> anyhow::Result<PathBuf> {
    if !assets.is_dir() {
        bail!("asset root {} does not exist", assets.display());
    }
    let ext = file
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .context("scene file has no extension")?;
    let src_dir = file.parent().unwrap_or(Path::new("."));
    let extra = external_uris(file, &ext)?;

    let dir = assets.join(id);
    if dir.exists() {
        if !force {
            bail!("{} already exists (use --force to replace it)", dir.display());
        }
        std::fs::remove_dir_all(&dir).with_context(|| format!("removing {}", dir.display()))?;
    }
    std::fs::create_dir_all(&dir)?;
    let target = dir.join(format!("scene.{ext}"));
    std::fs::copy(file, &target).with_context(|| format!("copying {}", file.display()))?;
    for rel in extra {
        let to = dir.join(&rel);
        if let Some(parent) = to.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::copy(src_dir.join(&rel), &to).with_context(|| format!("copying {}", rel.display()))?;
    }
    let meta = serde_json::json!({
        "unit_scale": unit_scale,
        "source": file.file_name().map(|n| n.to_string_lossy().into_owned()),
    });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    // the installed copy must load the same way the original did
    load_scene_with_id(&target, id, unit_scale).context("checking the installed copy")?;
    Ok(dir)
}

/// Relative files referenced by a glTF document (buffers and images).
fn external_uris(file: &Path, ext: &str) -> anyhow::Result<Vec<PathBuf>> {
    let json: serde_json::Value = match ext {
        "gltf" => serde_json::from_slice(&std::fs::read(file)?)?,
        "glb" => serde_json::from_slice(glb_json(&std::fs::read(file)?)?)?,
        _ => return Ok(Vec::new()),
    };
    let mut out = Vec::new();
    for key in ["buffers", "images"] {
        for item in json.get(key).and_then(|v| v.as_array()).into_iter().flatten() {
            let Some(uri) = item.get("uri").and_then(|u| u.as_str()) else {
                continue;
            };
            if uri.starts_with("data:") {
                continue;
            }
            if uri.contains("://") {
                bail!("{key} uri `{uri}` is remote");
            }
            // resolved exactly as the importer does: a plain relative path
            let rel = PathBuf::from(uri);
            if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
                bail!("{key} uri `{uri}` leaves the scene directory");
            }
            if !out.contains(&rel) {
                out.push(rel);
            }
        }
    }
    Ok(out)
}

fn glb_json(bytes: &[u8]) -> anyhow::Result<&[u8]> {
    let word = |at: usize| -> anyhow::Result<u32> {
        let b = bytes.get(at..at + 4).context("GLB is truncated")?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    };
    if !bytes.starts_with(b"glTF") || word(16)? != 0x4E4F_534A {
        bail!("not a GLB file with a leading JSON chunk");
    }
    let len = word(12)? as usize;
    bytes.get(20..20 + len).context("GLB JSON chunk is truncated")
}
