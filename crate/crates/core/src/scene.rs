//! Scene objects, their poses, and the original-pose contract behind the ghost clone.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::TriangleMesh;
use crate::transform::{Transform, TransformError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(#[from] TransformError),
    #[error("duplicate object id `{0}`")]
    DuplicateId(String),
    #[error("unit scale must be finite and > 0, got {0}")]
    InvalidUnitScale(f64),
}

#[derive(Clone, Debug)]
pub struct SceneObject {
    id: String,
    name: String,
    mesh: Arc<TriangleMesh>,
    current: Transform,
    original: Transform,
    label: Option<String>,
}

impl SceneObject {
    pub fn new(id: impl Into<String>, name: impl Into<String>, mesh: Arc<TriangleMesh>, pose: Transform) -> Self {
        SceneObject {
            id: id.into(),
            name: name.into(),
            mesh,
            current: pose,
            original: pose,
            label: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mesh(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    pub fn current(&self) -> &Transform {
        &self.current
    }

    /// Pose at load time. Never changes for the lifetime of the object.
    pub fn original(&self) -> &Transform {
        &self.original
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn is_displaced(&self) -> bool {
        self.current != self.original
    }
}

/// State change produced by a scene mutation, in a form the logbook can record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneEvent {
    TransformSet {
        object_id: String,
        previous: Transform,
        current: Transform,
    },
    Restored {
        object_id: String,
        original: Transform,
    },
    Labeled {
        object_id: String,
        previous: Option<String>,
        label: Option<String>,
    },
}

#[derive(Clone, Debug)]
pub struct Scene {
    scene_id: String,
    objects: Vec<SceneObject>,
    index: HashMap<String, usize>,
    source_file: PathBuf,
    unit_scale: f64,
}

impl Scene {
    pub fn new(
        scene_id: impl Into<String>,
        objects: Vec<SceneObject>,
        source_file: impl Into<PathBuf>,
        unit_scale: f64,
    ) -> Result<Self, SceneError> {
        if !(unit_scale.is_finite() && unit_scale > 0.0) {
            return Err(SceneError::InvalidUnitScale(unit_scale));
        }
        let mut index = HashMap::with_capacity(objects.len());
        for (i, o) in objects.iter().enumerate() {
            o.original.validate()?;
            if index.insert(o.id.clone(), i).is_some() {
                return Err(SceneError::DuplicateId(o.id.clone()));
            }
        }
        Ok(Scene {
            scene_id: scene_id.into(),
            objects,
            index,
            source_file: source_file.into(),
            unit_scale,
        })
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn source_file(&self) -> &Path {
        &self.source_file
    }

    pub fn unit_scale(&self) -> f64 {
        self.unit_scale
    }

    pub fn object(&self, id: &str) -> Result<&SceneObject, SceneError> {
        self.index
            .get(id)
            .map(|&i| &self.objects[i])
            .ok_or_else(|| SceneError::UnknownObject(id.to_owned()))
    }

    fn object_mut(&mut self, id: &str) -> Result<&mut SceneObject, SceneError> {
        match self.index.get(id) {
            Some(&i) => Ok(&mut self.objects[i]),
            None => Err(SceneError::UnknownObject(id.to_owned())),
        }
    }

    pub fn set_transform(&mut self, id: &str, t: Transform) -> Result<SceneEvent, SceneError> {
        let obj = self.object_mut(id)?;
        t.validate()?;
        let previous = std::mem::replace(&mut obj.current, t);
        Ok(SceneEvent::TransformSet {
            object_id: obj.id.clone(),
            previous,
            current: t,
        })
    }

    /// Puts the object back at its stored original pose (bit-exact copy).
    pub fn restore_original(&mut self, id: &str) -> Result<SceneEvent, SceneError> {
        let obj = self.object_mut(id)?;
        obj.current = obj.original;
        Ok(SceneEvent::Restored {
            object_id: obj.id.clone(),
            original: obj.original,
        })
    }

    pub fn set_label(&mut self, id: &str, label: Option<String>) -> Result<SceneEvent, SceneError> {
        let obj = self.object_mut(id)?;
        let previous = std::mem::replace(&mut obj.label, label.clone());
        Ok(SceneEvent::Labeled {
            object_id: obj.id.clone(),
            previous,
            label,
        })
    }
}
