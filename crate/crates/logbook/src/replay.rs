//! Rebuilding scene state from a log.

use scenelab_core::{Scene, Transform};

use crate::config::{pristine_states, Measurement, ObjectState, SceneConfiguration};
use crate::entry::{Action, LogEntry};
use crate::LogbookError;

/// Scene state as the log describes it.
#[derive(Clone, Debug, Default)]
struct State {
    scene_id: String,
    objects: Vec<ObjectState>,
    originals: Vec<Transform>,
    measurements: Vec<Measurement>,
    opened: bool,
}

impl State {
    fn open(&mut self, scene_id: &str, objects: &[ObjectState]) {
        self.scene_id = scene_id.to_owned();
        self.objects = objects.to_vec();
        self.originals = objects.iter().map(|o| o.transform).collect();
        self.measurements.clear();
        self.opened = true;
    }

    fn index(&self, seq: u64, id: &str) -> Result<usize, LogbookError> {
        self.objects
            .iter()
            .position(|o| o.id == id)
            .ok_or_else(|| LogbookError::ReplayMismatch {
                seq,
                message: format!("unknown object `{id}`"),
            })
    }

    fn config(&self, name: &str, created_at: u64) -> SceneConfiguration {
        SceneConfiguration {
            scene_id: self.scene_id.clone(),
            name: name.to_owned(),
            created_at,
            objects: self.objects.clone(),
            measurements: self.measurements.clone(),
        }
    }

    fn apply(&mut self, e: &LogEntry) -> Result<(), LogbookError> {
        let mismatch = |message: String| LogbookError::ReplayMismatch { seq: e.seq, message };
        if let Action::SceneOpen { scene_id, objects } = &e.action {
            self.open(scene_id, objects);
            return Ok(());
        }
        if !self.opened {
            return Err(mismatch("entry precedes any scene_open".into()));
        }
        if let Some(id) = e.action.object_id() {
            self.index(e.seq, id)?;
        }
        match &e.action {
            Action::SceneOpen { .. } => unreachable!("handled above"),
            Action::Select { .. }
            | Action::Expand { .. }
            | Action::Shrink { .. }
            | Action::ClassifyRequest { .. }
            | Action::Grab { .. } => {}
            Action::ClassifyResult { object_id, label, .. } => {
                if label.is_some() {
                    let i = self.index(e.seq, object_id)?;
                    self.objects[i].label = label.clone();
                }
            }
            Action::Label { object_id, label } => {
                let i = self.index(e.seq, object_id)?;
                self.objects[i].label = label.clone();
            }
            Action::Move { object_id, transform }
            | Action::Release {
                object_id,
                transform: Some(transform),
            } => {
                let i = self.index(e.seq, object_id)?;
                self.objects[i].transform = *transform;
            }
            Action::Release { transform: None, .. } => {}
            Action::Restore { object_id } => {
                let i = self.index(e.seq, object_id)?;
                self.objects[i].transform = self.originals[i];
            }
            Action::Measure(m) => self.measurements.push(*m),
            Action::SaveConfig { name, config } => {
                let here = self.config(name, config.created_at);
                if !here.same_state(config) {
                    return Err(mismatch(format!(
                        "saved configuration `{name}` differs from replayed state: {}",
                        here.diff(config).join("; ")
                    )));
                }
            }
            Action::LoadConfig { config, .. } => {
                if config.scene_id != self.scene_id {
                    return Err(mismatch(format!("configuration is for scene `{}`", config.scene_id)));
                }
                for o in &config.objects {
                    let i = self.index(e.seq, &o.id)?;
                    self.objects[i].transform = o.transform;
                    self.objects[i].label = o.label.clone();
                }
                self.measurements = config.measurements.clone();
            }
        }
        Ok(())
    }
}

fn check_order(entries: &[LogEntry]) -> Result<(), LogbookError> {
    for w in entries.windows(2) {
        if w[1].seq <= w[0].seq {
            return Err(LogbookError::ReplayMismatch {
                seq: w[1].seq,
                message: "entries are not in seq order".into(),
            });
        }
    }
    Ok(())
}

/// Re-applies `entries` to the pristine state of `scene`.
///
/// A `scene_open` entry in the log resets the state to the objects it records.
pub fn replay(scene: &Scene, entries: &[LogEntry]) -> Result<SceneConfiguration, LogbookError> {
    check_order(entries)?;
    let mut state = State::default();
    state.open(scene.scene_id(), &pristine_states(scene));
    for e in entries {
        state.apply(e)?;
    }
    Ok(state.config("replay", entries.last().map_or(0, |e| e.ts)))
}

/// Replays a self-contained log, which must begin with a `scene_open` entry.
pub fn replay_log(entries: &[LogEntry]) -> Result<SceneConfiguration, LogbookError> {
    check_order(entries)?;
    let mut state = State::default();
    for e in entries {
        state.apply(e)?;
    }
    if !state.opened {
        return Err(LogbookError::ReplayMismatch {
            seq: 0,
            message: "log contains no scene_open entry".into(),
        });
    }
    Ok(state.config("replay", entries.last().map_or(0, |e| e.ts)))
}
