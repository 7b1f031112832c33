use std::ops::{Deref, DerefMut};

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::ModelError;

/// End-effector pose: position in metres and a unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: Quaternion<f64>) -> Result<Self, ModelError> {
        if !position.iter().all(|v| v.is_finite()) || !orientation.coords.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        if orientation.norm() < 1e-9 {
            return Err(ModelError::Invalid("zero quaternion".into()));
        }
        Ok(Pose {
            position,
            orientation: UnitQuaternion::from_quaternion(orientation),
        })
    }

    /// From the wire order `(x, y, z, Xor, Yor, Zor, W)`.
    pub fn from_components(c: [f64; 7]) -> Result<Self, ModelError> {
        Pose::new(
            Vector3::new(c[0], c[1], c[2]),
            Quaternion::new(c[6], c[3], c[4], c[5]),
        )
    }

    pub fn components(&self) -> [f64; 7] {
        let p = self.position;
        let q = self.orientation.quaternion();
        [p.x, p.y, p.z, q.i, q.j, q.k, q.w]
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Pose {
            position: iso.translation.vector,
            orientation: iso.rotation,
        }
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }
}

/// Joint angles in radians, one per joint of a model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVector(pub Vec<f64>);

impl JointVector {
    pub fn zeros(dof: usize) -> Self {
        JointVector(vec![0.0; dof])
    }

    pub fn max_abs_diff(&self, other: &JointVector) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for JointVector {
    fn from(v: Vec<f64>) -> Self {
        JointVector(v)
    }
}

impl Deref for JointVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for JointVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}
