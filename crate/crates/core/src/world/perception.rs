//! Depth-camera stand-in. Every `camera.period` seconds it reports the objects
//! whose centroid lies inside the perception volume and which rest on a surface at
//! least `camera.min_surface` high. Robot link-frame origins inside the same volume
//! come back as spurious detections.
//!
//! The perception volume is the sphere of radius `camera.range` about the camera,
//! cut to `z >= min_surface` and to the column above the table top.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detection {
    Object(u32),
    /// Part of a robot seen as if it were an object.
    Spurious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceivedObject {
    pub detection: Detection,
    pub centroid: Vector3<f64>,
    pub dims: [f64; 3],
    /// Simulated time of the update, s.
    pub timestamp: f64,
}

impl PerceivedObject {
    pub fn is_spurious(&self) -> bool {
        self.detection == Detection::Spurious
    }

    pub fn object_id(&self) -> Option<u32> {
        match self.detection {
            Detection::Object(id) => Some(id),
            Detection::Spurious => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Perception {
    NotDue,
    Batch(Vec<PerceivedObject>),
}

/// Whether a point lies inside the perception volume.
pub fn in_perception_volume(scene: &Scene, p: &Vector3<f64>) -> bool {
    let cam = &scene.camera;
    (p - cam.origin()).norm() <= cam.range && p.z >= cam.min_surface && scene.table.contains_xy(p.x, p.y)
}

/// One perception update. `link_origins` are the world-frame link-frame origins of
/// every robot at `now`; `last` is the time of the previous batch.
pub fn perceive(scene: &Scene, link_origins: &[Vector3<f64>], now: f64, last: Option<f64>) -> Perception {
    if let Some(last) = last {
        if now - last < scene.camera.period - 1e-9 {
            return Perception::NotDue;
        }
    }
    let mut batch: Vec<PerceivedObject> = scene
        .objects
        .iter()
        .filter(|o| matches!(o.support, Some(s) if s >= scene.camera.min_surface))
        .filter(|o| in_perception_volume(scene, &o.position))
        .map(|o| PerceivedObject {
            detection: Detection::Object(o.id),
            centroid: o.position,
            dims: o.shape.dims(),
            timestamp: now,
        })
        .collect();
    batch.extend(
        link_origins
            .iter()
            .filter(|p| in_perception_volume(scene, p))
            .map(|p| PerceivedObject {
                detection: Detection::Spurious,
                centroid: *p,
                dims: [0.0; 3],
                timestamp: now,
            }),
    );
    Perception::Batch(batch)
}
