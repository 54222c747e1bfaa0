use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Quat, Vec3};

/// Maximum allowed deviation of a rotation quaternion's norm from 1.
pub const QUAT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("transform has a non-finite component")]
    NonFinite,
    #[error("rotation quaternion norm {0} is not within {QUAT_NORM_TOLERANCE} of 1")]
    RotationNotUnit(f64),
    #[error("scale components must be > 0, got {0:?}")]
    NonPositiveScale([f64; 3]),
}

/// Object pose: scale, then rotate, then translate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub translation: Vec3,
    pub rotation: Quat,
    pub scale: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Transform::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        translation: Vec3::ZERO,
        rotation: Quat::IDENTITY,
        scale: Vec3::ONE,
    };

    pub fn from_translation(t: Vec3) -> Self {
        Transform {
            translation: t,
            ..Transform::IDENTITY
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if !(self.translation.is_finite() && self.rotation.is_finite() && self.scale.is_finite()) {
            return Err(TransformError::NonFinite);
        }
        let n = self.rotation.norm();
        if (n - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(TransformError::RotationNotUnit(n));
        }
        let s = self.scale;
        if s.x <= 0.0 || s.y <= 0.0 || s.z <= 0.0 {
            return Err(TransformError::NonPositiveScale(s.to_array()));
        }
        Ok(())
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p.mul_elem(self.scale)) + self.translation
    }

    /// `self ∘ child`: the child's pose expressed in this transform's parent frame.
    ///
    /// Exact when `self.scale` is uniform; with non-uniform parent scale and a
    /// rotated child the true composition has shear, which cannot be represented
    /// and is approximated by the componentwise scale product.
    pub fn compose(&self, child: &Transform) -> Transform {
        Transform {
            translation: self.apply(child.translation),
            rotation: self.rotation * child.rotation,
            scale: self.scale.mul_elem(child.scale),
        }
    }

    /// Uniformly rescales the pose (used for file-unit to metre conversion).
    pub fn scaled_by(&self, factor: f64) -> Transform {
        Transform {
            translation: self.translation * factor,
            rotation: self.rotation,
            scale: self.scale * factor,
        }
    }
}
