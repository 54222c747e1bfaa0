//! Saved scene configurations: poses, labels and measurements at a point in time.

use scenelab_core::{measure_distance, Scene, Transform, Vec3};
use serde::{Deserialize, Serialize};

/// Measured distances must agree with their endpoints to this tolerance.
pub const DISTANCE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: String,
    pub transform: Transform,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub a: Vec3,
    pub b: Vec3,
    pub distance: f64,
}

impl Measurement {
    pub fn between(a: Vec3, b: Vec3) -> Option<Measurement> {
        measure_distance(a, b).ok().map(|distance| Measurement { a, b, distance })
    }

    pub fn validate(&self) -> Result<(), String> {
        let d = measure_distance(self.a, self.b).map_err(|e| e.to_string())?;
        if !self.distance.is_finite() || (d - self.distance).abs() > DISTANCE_TOLERANCE * d.max(1.0) {
            return Err(format!("stored distance {} does not match endpoints ({d})", self.distance));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfiguration {
    pub scene_id: String,
    pub name: String,
    /// UTC milliseconds.
    pub created_at: u64,
    pub objects: Vec<ObjectState>,
    #[serde(default)]
    pub measurements: Vec<Measurement>,
}

impl SceneConfiguration {
    /// Snapshot of the scene's current poses and labels.
    pub fn from_scene(scene: &Scene, measurements: &[Measurement], name: impl Into<String>, created_at: u64) -> Self {
        SceneConfiguration {
            scene_id: scene.scene_id().to_owned(),
            name: name.into(),
            created_at,
            objects: current_states(scene),
            measurements: measurements.to_vec(),
        }
    }

    /// The scene as loaded: original poses, no labels, no measurements.
    pub fn pristine(scene: &Scene) -> Self {
        SceneConfiguration {
            scene_id: scene.scene_id().to_owned(),
            name: String::new(),
            created_at: 0,
            objects: pristine_states(scene),
            measurements: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for o in &self.objects {
            o.transform.validate().map_err(|e| format!("{}: {e}", o.id))?;
        }
        for m in &self.measurements {
            m.validate()?;
        }
        Ok(())
    }

    /// Equality of scene state, ignoring name and creation time.
    pub fn same_state(&self, other: &SceneConfiguration) -> bool {
        self.scene_id == other.scene_id && self.objects == other.objects && self.measurements == other.measurements
    }

    /// Human-readable differences in scene state, empty when [`same_state`](Self::same_state).
    pub fn diff(&self, other: &SceneConfiguration) -> Vec<String> {
        let mut out = Vec::new();
        if self.scene_id != other.scene_id {
            out.push(format!("scene_id: {} != {}", self.scene_id, other.scene_id));
        }
        let max = self.objects.len().max(other.objects.len());
        for i in 0..max {
            match (self.objects.get(i), other.objects.get(i)) {
                (Some(a), Some(b)) if a == b => {}
                (Some(a), Some(b)) if a.id != b.id => out.push(format!("object #{i}: id {} != {}", a.id, b.id)),
                (Some(a), Some(b)) => {
                    if a.transform != b.transform {
                        out.push(format!("{}: transform {} != {}", a.id, json(&a.transform), json(&b.transform)));
                    }
                    if a.label != b.label {
                        out.push(format!("{}: label {:?} != {:?}", a.id, a.label, b.label));
                    }
                }
                (Some(a), None) => out.push(format!("{}: missing on the right", a.id)),
                (None, Some(b)) => out.push(format!("{}: missing on the left", b.id)),
                (None, None) => unreachable!(),
            }
        }
        if self.measurements != other.measurements {
            out.push(format!(
                "measurements: {} != {}",
                json(&self.measurements),
                json(&other.measurements)
            ));
        }
        out
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}

pub fn current_states(scene: &Scene) -> Vec<ObjectState> {
    scene
        .objects()
        .iter()
        .map(|o| ObjectState {
            id: o.id().to_owned(),
            transform: *o.current(),
            label: o.label().map(str::to_owned),
        })
        .collect()
}

pub fn pristine_states(scene: &Scene) -> Vec<ObjectState> {
    scene
        .objects()
        .iter()
        .map(|o| ObjectState {
            id: o.id().to_owned(),
            transform: *o.original(),
            label: None,
        })
        .collect()
}
