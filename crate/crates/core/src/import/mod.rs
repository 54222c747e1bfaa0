//! Scene import from OBJ and glTF 2.0 files.

pub mod gltf;
pub mod obj;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::TriangleMesh;
use crate::scene::{Scene, SceneError, SceneObject};
use crate::transform::Transform;

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("parse error{}: {message}", location(*line, *byte_offset))]
    Parse {
        line: Option<usize>,
        byte_offset: Option<usize>,
        message: String,
    },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("scene contains no meshes")]
    EmptyScene,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unrecognized scene file extension for {0} (expected .obj, .gltf or .glb)")]
    UnknownFormat(PathBuf),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

fn location(line: Option<usize>, offset: Option<usize>) -> String {
    match (line, offset) {
        (Some(l), Some(o)) => format!(" at line {l} (byte {o})"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(o)) => format!(" at byte {o}"),
        (None, None) => String::new(),
    }
}

/// One mesh-bearing node as read from a file, before ids are assigned.
#[derive(Clone, Debug)]
pub struct ImportedObject {
    pub name: String,
    pub mesh: Arc<TriangleMesh>,
    /// Pose in file units.
    pub pose: Transform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneFormat {
    Obj,
    Gltf,
}

impl SceneFormat {
    pub fn from_path(path: &Path) -> Option<SceneFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(SceneFormat::Obj),
            "gltf" | "glb" => Some(SceneFormat::Gltf),
            _ => None,
        }
    }
}

/// Loads a scene, naming it after the file stem.
pub fn load_scene(path: &Path, unit_scale: f64) -> Result<Scene, ImportError> {
    let scene_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scene")
        .to_owned();
    load_scene_with_id(path, &scene_id, unit_scale)
}

pub fn load_scene_with_id(path: &Path, scene_id: &str, unit_scale: f64) -> Result<Scene, ImportError> {
    let format = SceneFormat::from_path(path).ok_or_else(|| ImportError::UnknownFormat(path.to_owned()))?;
    let bytes = std::fs::read(path).map_err(|e| ImportError::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let objects = match format {
        SceneFormat::Obj => {
            let text = std::str::from_utf8(&bytes).map_err(|e| ImportError::Parse {
                line: None,
                byte_offset: Some(e.valid_up_to()),
                message: "OBJ file is not valid UTF-8".into(),
            })?;
            obj::parse(text)?
        }
        SceneFormat::Gltf => gltf::parse(&bytes, path.parent())?,
    };
    build_scene(scene_id, objects, path, unit_scale)
}

/// Assigns `<scene_id>/<name>/<ordinal>` ids and converts poses to metres.
pub fn build_scene(
    scene_id: &str,
    objects: Vec<ImportedObject>,
    source: &Path,
    unit_scale: f64,
) -> Result<Scene, ImportError> {
    if objects.is_empty() {
        return Err(ImportError::EmptyScene);
    }
    if !(unit_scale.is_finite() && unit_scale > 0.0) {
        return Err(SceneError::InvalidUnitScale(unit_scale).into());
    }
    let mut ordinals: HashMap<String, usize> = HashMap::new();
    let scene_objects = objects
        .into_iter()
        .map(|o| {
            let n = ordinals.entry(o.name.clone()).or_insert(0);
            let id = format!("{scene_id}/{}/{n}", o.name);
            *n += 1;
            SceneObject::new(id, o.name, o.mesh, o.pose.scaled_by(unit_scale))
        })
        .collect();
    Ok(Scene::new(scene_id, scene_objects, source, unit_scale)?)
}
