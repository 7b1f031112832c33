use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::JointVector;
use crate::RobotKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("cannot read model file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DhConvention {
    /// `RotZ(theta) TransZ(d) TransX(a) RotX(alpha)`, joint axis is the previous frame's z.
    Standard,
    /// `RotX(alpha) TransX(a) RotZ(theta) TransZ(d)`, joint axis is the new frame's z.
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct ModelFile {
    name: RobotKind,
    convention: DhConvention,
    home: Vec<f64>,
    joint: Vec<JointEntry>,
    tool: ToolEntry,
}

#[derive(Debug, Clone, Deserialize)]
struct JointEntry {
    a: f64,
    alpha: f64,
    d: f64,
    theta_offset: f64,
    limits: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
struct ToolEntry {
    xyz: [f64; 3],
    rpy: [f64; 3],
}

/// A serial revolute manipulator.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicModel {
    kind: RobotKind,
    convention: DhConvention,
    rows: Vec<DhRow>,
    limits: Vec<(f64, f64)>,
    tool: Isometry3<f64>,
    home: JointVector,
}

impl KinematicModel {
    pub fn builtin(kind: RobotKind) -> KinematicModel {
        let src = match kind {
            RobotKind::Ur5 => include_str!("../../models/ur5.toml"),
            RobotKind::Panda => include_str!("../../models/panda.toml"),
        };
        Self::from_toml_str(src).expect("vendored model files are valid")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<KinematicModel, ModelError> {
        let src = std::fs::read_to_string(path.as_ref()).map_err(|e| ModelError::Io(e.to_string()))?;
        Self::from_toml_str(&src)
    }

    pub fn from_toml_str(src: &str) -> Result<KinematicModel, ModelError> {
        let file: ModelFile = toml::from_str(src).map_err(|e| ModelError::Invalid(e.to_string()))?;
        let dof = file.joint.len();
        if dof != 6 && dof != 7 {
            return Err(ModelError::Invalid(format!("{dof} joints, expected 6 or 7")));
        }
        let mut rows = Vec::with_capacity(dof);
        let mut limits = Vec::with_capacity(dof);
        for (i, j) in file.joint.iter().enumerate() {
            let (lo, hi) = (j.limits[0].max(-PI), j.limits[1].min(PI));
            if !(lo < hi) {
                return Err(ModelError::Invalid(format!("joint {} has empty limits", i + 1)));
            }
            rows.push(DhRow {
                a: j.a,
                alpha: j.alpha,
                d: j.d,
                theta_offset: j.theta_offset,
            });
            limits.push((lo, hi));
        }
        if file.home.len() != dof {
            return Err(ModelError::DimensionMismatch {
                expected: dof,
                got: file.home.len(),
            });
        }
        let home = JointVector(file.home);
        if home.iter().zip(&limits).any(|(q, (lo, hi))| q < lo || q > hi) {
            return Err(ModelError::Invalid("home outside joint limits".into()));
        }
        let tool = Isometry3::from_parts(
            Translation3::new(file.tool.xyz[0], file.tool.xyz[1], file.tool.xyz[2]),
            UnitQuaternion::from_euler_angles(file.tool.rpy[0], file.tool.rpy[1], file.tool.rpy[2]),
        );
        Ok(KinematicModel {
            kind: file.name,
            convention: file.convention,
            rows,
            limits,
            tool,
            home,
        })
    }

    pub fn kind(&self) -> RobotKind {
        self.kind
    }

    pub fn dof(&self) -> usize {
        self.rows.len()
    }

    pub fn convention(&self) -> DhConvention {
        self.convention
    }

    pub fn rows(&self) -> &[DhRow] {
        &self.rows
    }

    pub fn limits(&self) -> &[(f64, f64)] {
        &self.limits
    }

    pub fn tool(&self) -> &Isometry3<f64> {
        &self.tool
    }

    pub fn home(&self) -> &JointVector {
        &self.home
    }

    pub fn check_dim(&self, q: &[f64]) -> Result<(), ModelError> {
        if q.len() != self.dof() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        if !q.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, (lo, hi)) in q.iter_mut().zip(&self.limits) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Brings `q` back inside the limits: joints whose range spans a full turn wrap
    /// around, the others clamp.
    pub fn project(&self, q: &mut [f64]) {
        for (v, (lo, hi)) in q.iter_mut().zip(&self.limits) {
            if hi - lo >= 2.0 * PI - 1e-9 {
                *v = lo + (*v - lo).rem_euclid(2.0 * PI);
                if *v > *hi {
                    *v = *hi;
                }
            } else {
                *v = v.clamp(*lo, *hi);
            }
        }
    }

    pub fn clamped(&self, q: &JointVector) -> JointVector {
        let mut out = q.clone();
        self.clamp(&mut out);
        out
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.iter().zip(&self.limits).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }
}
