//! Examiner camera and the observation plane anchored at a selection.

use serde::{Deserialize, Serialize};

use crate::math::{Quat, Vec3};
use crate::mesh::TriangleMesh;
use crate::selection::{SelectionError, VertexSelection};
use crate::transform::{Transform, QUAT_NORM_TOLERANCE};

pub const DEFAULT_RESOLUTION: u32 = 512;
pub const MIN_RESOLUTION: u32 = 16;
/// Snapshots are refused above this edge length.
pub const MAX_RESOLUTION: u32 = 4096;

/// Camera looking down its local −Z axis with +Y up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub orientation: Quat,
    /// Radians, in (0, π).
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraPose {
    /// Camera at `position` aimed at `target`, with `up` as the approximate up hint.
    pub fn look_at(position: Vec3, target: Vec3, up: Vec3) -> Result<CameraPose, SelectionError> {
        let forward = (target - position)
            .normalized()
            .ok_or(SelectionError::DegeneratePose("camera target equals camera position"))?;
        let right = forward
            .cross(up)
            .normalized()
            .ok_or(SelectionError::DegeneratePose("up hint parallel to view direction"))?;
        let true_up = right.cross(forward);
        let back = -forward;
        let rows = [
            [right.x, true_up.x, back.x],
            [right.y, true_up.y, back.y],
            [right.z, true_up.z, back.z],
        ];
        Ok(CameraPose {
            position,
            orientation: Quat::from_rotation_rows(rows),
            vertical_fov: std::f64::consts::FRAC_PI_3,
            width: DEFAULT_RESOLUTION,
            height: DEFAULT_RESOLUTION,
        })
    }

    pub fn with_resolution(mut self, width: u32, height: u32) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        if !self.position.is_finite() || !self.orientation.is_finite() || !self.vertical_fov.is_finite() {
            return Err(SelectionError::NonFiniteInput);
        }
        if (self.orientation.norm() - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(SelectionError::InvalidCamera(format!(
                "orientation norm {} is not 1",
                self.orientation.norm()
            )));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < std::f64::consts::PI) {
            return Err(SelectionError::InvalidCamera(format!(
                "vertical fov {} outside (0, π)",
                self.vertical_fov
            )));
        }
        let ok = |d: u32| (MIN_RESOLUTION..=MAX_RESOLUTION).contains(&d);
        if !ok(self.width) || !ok(self.height) {
            return Err(SelectionError::InvalidCamera(format!(
                "resolution {}x{} outside {MIN_RESOLUTION}..={MAX_RESOLUTION}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn up(&self) -> Vec3 {
        self.orientation.rotate(Vec3::Y)
    }

    pub fn forward(&self) -> Vec3 {
        self.orientation.rotate(-Vec3::Z)
    }

    /// World point expressed in camera space.
    pub fn to_view(&self, world: Vec3) -> Vec3 {
        self.orientation.conjugate().rotate(world - self.position)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationPlane {
    pub center: Vec3,
    pub normal: Vec3,
    pub up: Vec3,
}

/// World-space positions of the selected vertices under `pose`.
pub fn selected_points(mesh: &TriangleMesh, pose: &Transform, sel: &VertexSelection) -> Result<Vec<Vec3>, SelectionError> {
    sel.check(mesh)?;
    Ok(sel
        .indices
        .iter()
        .map(|&i| pose.apply(mesh.vertices()[i as usize]))
        .collect())
}

/// Plane through the selection centroid, facing the camera, with the camera's
/// up direction projected into it.
pub fn observation_plane(
    camera: &CameraPose,
    mesh: &TriangleMesh,
    pose: &Transform,
    sel: &VertexSelection,
) -> Result<ObservationPlane, SelectionError> {
    camera.validate()?;
    let points = selected_points(mesh, pose, sel)?;
    if points.is_empty() {
        return Err(SelectionError::EmptySelection);
    }
    let sum = points.iter().fold(Vec3::ZERO, |acc, p| acc + *p);
    let center = sum / points.len() as f64;

    const EPS: f64 = 1e-9;
    let to_camera = camera.position - center;
    if to_camera.length() <= EPS {
        return Err(SelectionError::DegeneratePose("camera at selection centroid"));
    }
    let normal = to_camera.normalized().ok_or(SelectionError::DegeneratePose("camera at selection centroid"))?;
    let cam_up = camera.up();
    let projected = cam_up - normal * cam_up.dot(normal);
    if projected.length() <= EPS {
        return Err(SelectionError::DegeneratePose("camera up parallel to plane normal"));
    }
    let mut up = projected.normalized().ok_or(SelectionError::DegeneratePose("camera up parallel to plane normal"))?;
    // second Gram-Schmidt pass keeps normal·up at rounding level
    up = (up - normal * up.dot(normal))
        .normalized()
        .ok_or(SelectionError::DegeneratePose("camera up parallel to plane normal"))?;
    Ok(ObservationPlane { center, normal, up })
}
