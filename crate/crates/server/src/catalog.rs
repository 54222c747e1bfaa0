//! Asset directory: `<root>/<scene_id>/scene.(obj|gltf|glb)` plus optional
//! `meta.json` and `thumbnail.png`.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use scenelab_protocol::messages::SceneDescriptor;
use serde_json::Value;
use thiserror::Error;

const SCENE_FILES: [&str; 3] = ["scene.obj", "scene.gltf", "scene.glb"];

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("path `{0}` escapes the asset root")]
    Forbidden(String),
    #[error("no asset at `{0}`")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub scene_id: String,
    pub scene_file: PathBuf,
    pub thumbnail: Option<PathBuf>,
    pub meta: Value,
}

impl CatalogEntry {
    /// `meta.unit_scale`, default 1.
    pub fn unit_scale(&self) -> f64 {
        self.meta.get("unit_scale").and_then(Value::as_f64).unwrap_or(1.0)
    }
}

#[derive(Clone, Debug)]
pub struct AssetCatalog {
    root: PathBuf,
    entries: BTreeMap<String, CatalogEntry>,
}

impl AssetCatalog {
    /// Indexes every subdirectory holding a scene file. The root must exist.
    pub fn scan(root: &Path) -> Result<Self, AssetError> {
        let root = root.canonicalize()?;
        let mut entries = BTreeMap::new();
        for dir in std::fs::read_dir(&root)? {
            let dir = dir?;
            if !dir.file_type()?.is_dir() {
                continue;
            }
            let Some(scene_id) = dir.file_name().to_str().map(str::to_owned) else {
                continue;
            };
            let Some(scene_file) = SCENE_FILES.iter().map(|f| dir.path().join(f)).find(|p| p.is_file()) else {
                continue;
            };
            let meta = std::fs::read(dir.path().join("meta.json"))
                .ok()
                .and_then(|b| serde_json::from_slice(&b).ok())
                .unwrap_or(Value::Null);
            let thumb = dir.path().join("thumbnail.png");
            entries.insert(
                scene_id.clone(),
                CatalogEntry {
                    scene_id,
                    scene_file,
                    thumbnail: thumb.is_file().then_some(thumb),
                    meta,
                },
            );
        }
        Ok(AssetCatalog { root, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn get(&self, scene_id: &str) -> Option<&CatalogEntry> {
        self.entries.get(scene_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn descriptors(&self) -> Vec<SceneDescriptor> {
        let rel = |p: &Path| p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().replace('\\', "/");
        self.entries
            .values()
            .map(|e| SceneDescriptor {
                scene_id: e.scene_id.clone(),
                file: rel(&e.scene_file),
                thumbnail: e.thumbnail.as_deref().map(rel),
                meta: e.meta.clone(),
            })
            .collect()
    }

    pub fn resolve(&self, rel: &str) -> Result<PathBuf, AssetError> {
        confine(&self.root, rel)
    }
}

/// Maps a client-supplied relative path to a file under `root`, refusing
/// absolute paths, `..` components, and symlinks that lead outside.
pub fn confine(root: &Path, rel: &str) -> Result<PathBuf, AssetError> {
    let forbidden = || AssetError::Forbidden(rel.to_owned());
    if rel.contains('\0') || rel.contains('\\') {
        return Err(forbidden());
    }
    let rel_path = Path::new(rel.trim_start_matches('/'));
    if rel.starts_with("//") || rel_path.is_absolute() {
        return Err(forbidden());
    }
    for c in rel_path.components() {
        match c {
            Component::Normal(_) | Component::CurDir => {}
            Component::ParentDir | Component::RootDir | Component::Prefix(_) => return Err(forbidden()),
        }
    }
    let joined = root.join(rel_path);
    let real = match joined.canonicalize() {
        Ok(p) => p,
        Err(_) => return Err(AssetError::NotFound(rel.to_owned())),
    };
    let root = root.canonicalize()?;
    if !real.starts_with(&root) {
        return Err(forbidden());
    }
    if !real.is_file() {
        return Err(AssetError::NotFound(rel.to_owned()));
    }
    Ok(real)
}
