//! Log records and the action vocabulary.

use scenelab_core::Transform;
use scenelab_detection::Detection;
use serde::{Deserialize, Serialize};

use crate::config::{Measurement, ObjectState, SceneConfiguration};

/// What the examiner did, with enough data to re-apply it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "payload", rename_all = "snake_case")]
pub enum Action {
    /// Pristine state of the scene the session works on.
    SceneOpen {
        scene_id: String,
        objects: Vec<ObjectState>,
    },
    Select {
        object_id: String,
        indices: Vec<u32>,
    },
    Expand {
        object_id: String,
        indices: Vec<u32>,
    },
    Shrink {
        object_id: String,
        indices: Vec<u32>,
    },
    ClassifyRequest {
        object_id: String,
        vertex_count: usize,
        image_sha256: String,
    },
    ClassifyResult {
        object_id: String,
        backend_id: String,
        detections: Vec<Detection>,
        latency_ms: u64,
        /// Label applied to the object, `None` when nothing was detected.
        label: Option<String>,
    },
    Label {
        object_id: String,
        label: Option<String>,
    },
    Grab {
        object_id: String,
    },
    Move {
        object_id: String,
        transform: Transform,
    },
    Release {
        object_id: String,
        #[serde(default)]
        transform: Option<Transform>,
    },
    Restore {
        object_id: String,
    },
    Measure(Measurement),
    SaveConfig {
        name: String,
        config: SceneConfiguration,
    },
    LoadConfig {
        name: String,
        config: SceneConfiguration,
    },
}

pub const ACTION_NAMES: [&str; 14] = [
    "scene_open",
    "select",
    "expand",
    "shrink",
    "classify_request",
    "classify_result",
    "label",
    "grab",
    "move",
    "release",
    "restore",
    "measure",
    "save_config",
    "load_config",
];

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::SceneOpen { .. } => "scene_open",
            Action::Select { .. } => "select",
            Action::Expand { .. } => "expand",
            Action::Shrink { .. } => "shrink",
            Action::ClassifyRequest { .. } => "classify_request",
            Action::ClassifyResult { .. } => "classify_result",
            Action::Label { .. } => "label",
            Action::Grab { .. } => "grab",
            Action::Move { .. } => "move",
            Action::Release { .. } => "release",
            Action::Restore { .. } => "restore",
            Action::Measure(_) => "measure",
            Action::SaveConfig { .. } => "save_config",
            Action::LoadConfig { .. } => "load_config",
        }
    }

    /// Object the action refers to, if any.
    pub fn object_id(&self) -> Option<&str> {
        match self {
            Action::Select { object_id, .. }
            | Action::Expand { object_id, .. }
            | Action::Shrink { object_id, .. }
            | Action::ClassifyRequest { object_id, .. }
            | Action::ClassifyResult { object_id, .. }
            | Action::Label { object_id, .. }
            | Action::Grab { object_id }
            | Action::Move { object_id, .. }
            | Action::Release { object_id, .. }
            | Action::Restore { object_id } => Some(object_id),
            _ => None,
        }
    }

    /// Rejects payloads that could not be re-applied, notably non-finite numbers
    /// (which the text encoding would otherwise silently turn into `null`).
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Action::SceneOpen { objects, .. } => objects
                .iter()
                .try_for_each(|o| o.transform.validate().map_err(|e| format!("{}: {e}", o.id))),
            Action::ClassifyResult { detections, .. } => detections.iter().try_for_each(Detection::validate),
            Action::Move { transform, .. }
            | Action::Release {
                transform: Some(transform),
                ..
            } => transform.validate().map_err(|e| e.to_string()),
            Action::Measure(m) => m.validate(),
            Action::SaveConfig { config, .. } | Action::LoadConfig { config, .. } => config.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    /// UTC milliseconds.
    pub ts: u64,
    pub session: String,
    #[serde(flatten)]
    pub action: Action,
}
