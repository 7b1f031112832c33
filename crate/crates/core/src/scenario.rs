//! Scenario files: scene geometry, controller and solver settings, the drop
//! threshold, the seed and the randomized-trial sampling used by the grasp bench.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Aabb, Camera, DropZone, RobotMount, Scene, SceneObject, Shape, WorldConfig};
use crate::RobotKind;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Where randomized trial objects are put: uniformly in an annulus around the
/// robot base, on the table top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialSampling {
    pub radius_min: f64,
    pub radius_max: f64,
    /// Bearings from the base are drawn within this many degrees of world +x.
    pub bearing_half_angle_deg: f64,
    /// Keep objects this far inside the table edge, m.
    pub edge_margin: f64,
    /// Probability that the object is a cylinder rather than a box.
    pub cylinder_fraction: f64,
    /// Simulated seconds allowed per trial.
    pub time_limit: f64,
}

impl Default for TrialSampling {
    fn default() -> Self {
        TrialSampling {
            radius_min: 0.5,
            radius_max: 0.75,
            bearing_half_angle_deg: 30.0,
            edge_margin: 0.05,
            cylinder_fraction: 0.3,
            time_limit: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Fixed simulation tick, s.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Period of the 9001/9002 telemetry frames, s.
    #[serde(default = "default_telemetry_period")]
    pub telemetry_period: f64,
    #[serde(flatten)]
    pub world: WorldConfig,
    #[serde(default)]
    pub trials: TrialSampling,
}

fn default_seed() -> u64 {
    7
}

fn default_dt() -> f64 {
    0.001
}

fn default_telemetry_period() -> f64 {
    1.0
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: default_seed(),
            dt: default_dt(),
            telemetry_period: default_telemetry_period(),
            world: WorldConfig {
                scene: default_scene(),
                position: Default::default(),
                effort: Default::default(),
                ik: Default::default(),
                grasp: Default::default(),
            },
            trials: TrialSampling::default(),
        }
    }
}

/// Table in front of both arms, camera above its middle, one drop zone per arm.
pub fn default_scene() -> Scene {
    let top = 0.5;
    Scene {
        table: Aabb::new([0.3, -1.0, 0.0], [1.1, 1.0, top]),
        collision_cube: Aabb::new([0.32, -0.98, 0.0], [1.08, 0.98, top - 0.02]),
        camera: Camera::default(),
        robots: vec![
            RobotMount {
                kind: RobotKind::Ur5,
                base: [0.0, 0.4, top],
                // its zero base angle points away from the table
                yaw: std::f64::consts::PI,
                drop_zone: DropZone {
                    center: [0.6, 0.4],
                    half_extents: [0.06, 0.06],
                    surface: top,
                },
            },
            RobotMount {
                kind: RobotKind::Panda,
                base: [0.0, -0.4, top],
                yaw: 0.0,
                drop_zone: DropZone {
                    center: [0.6, -0.4],
                    half_extents: [0.06, 0.06],
                    surface: top,
                },
            },
        ],
        objects: vec![
            SceneObject {
                id: 1,
                shape: Shape::Box { size: [0.05, 0.04, 0.06] },
                position: Vector3::new(0.55, 0.0, top + 0.03),
                yaw: 0.3,
                support: Some(top),
            },
            SceneObject {
                id: 2,
                shape: Shape::Cylinder {
                    radius: 0.02,
                    height: 0.08,
                },
                position: Vector3::new(0.45, -0.75, top + 0.04),
                yaw: 0.0,
                support: Some(top),
            },
        ],
    }
}

impl Scenario {
    pub fn from_toml_str(src: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = toml::from_str(src).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&src)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(ScenarioError::Invalid("dt must lie in (0, 0.1] s".into()));
        }
        if !(self.telemetry_period > 0.0) {
            return Err(ScenarioError::Invalid("telemetry_period must be positive".into()));
        }
        self.world.scene.validate().map_err(ScenarioError::Invalid)?;
        self.world.position.validate().map_err(ScenarioError::Invalid)?;
        self.world.effort.validate().map_err(ScenarioError::Invalid)?;
        if !(self.world.grasp.theta_drop_deg > 0.0) {
            return Err(ScenarioError::Invalid("theta_drop_deg must be positive".into()));
        }
        let t = &self.trials;
        if !(0.0 < t.radius_min && t.radius_min < t.radius_max) {
            return Err(ScenarioError::Invalid("trial radii must satisfy 0 < min < max".into()));
        }
        if !(0.0..=1.0).contains(&t.cylinder_fraction) || !(t.time_limit > 0.0) {
            return Err(ScenarioError::Invalid("bad trial sampling settings".into()));
        }
        Ok(())
    }
}
