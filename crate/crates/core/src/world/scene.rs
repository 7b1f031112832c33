use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::RobotKind;

/// How far an object released slightly inside a surface is pushed back onto it, m.
pub const SURFACE_SNAP: f64 = 0.005;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|i| other.min[i] >= self.min[i] && other.max[i] <= self.max[i])
    }

    pub fn top(&self) -> f64 {
        self.max[2]
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i] < self.max[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    /// Full extents along the object's x, y, z.
    Box { size: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
}

impl Shape {
    pub fn height(&self) -> f64 {
        match *self {
            Shape::Box { size } => size[2],
            Shape::Cylinder { height, .. } => height,
        }
    }

    /// Extent of the object along a horizontal unit direction given in the object frame.
    pub fn width_along(&self, local_dir: &Vector3<f64>) -> f64 {
        match *self {
            Shape::Box { size } => size[0] * local_dir.x.abs() + size[1] * local_dir.y.abs(),
            Shape::Cylinder { radius, .. } => 2.0 * radius,
        }
    }

    pub fn dims(&self) -> [f64; 3] {
        match *self {
            Shape::Box { size } => size,
            Shape::Cylinder { radius, height } => [2.0 * radius, 2.0 * radius, height],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    #[serde(flatten)]
    pub shape: Shape,
    /// Centroid, world frame.
    pub position: Vector3<f64>,
    /// Rotation about world z.
    pub yaw: f64,
    /// Height of the surface it rests on; `None` while carried.
    pub support: Option<f64>,
}

impl SceneObject {
    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::from(self.position),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw),
        )
    }

    pub fn set_isometry(&mut self, iso: &Isometry3<f64>) {
        self.position = iso.translation.vector;
        self.yaw = iso.rotation.euler_angles().2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f64; 3],
    /// Detection radius, m.
    pub range: f64,
    /// Seconds between perception updates.
    pub period: f64,
    /// Lowest supporting surface that counts, m.
    pub min_surface: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            position: [0.85, 0.0, 1.9],
            range: 1.85,
            period: 5.0,
            min_surface: 0.5,
        }
    }
}

impl Camera {
    pub fn origin(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }
}

/// Placement target on a horizontal surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropZone {
    pub center: [f64; 2],
    pub half_extents: [f64; 2],
    pub surface: f64,
}

impl DropZone {
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        (x - self.center[0]).abs() <= self.half_extents[0] && (y - self.center[1]).abs() <= self.half_extents[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotMount {
    pub kind: RobotKind,
    pub base: [f64; 3],
    /// Rotation of the base about world z.
    pub yaw: f64,
    pub drop_zone: DropZone,
}

impl RobotMount {
    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::new(self.base[0], self.base[1], self.base[2]),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// The table top is the box's top face.
    pub table: Aabb,
    /// Obstacle standing in for the table body.
    pub collision_cube: Aabb,
    pub camera: Camera,
    pub robots: Vec<RobotMount>,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn mount(&self, kind: RobotKind) -> Option<&RobotMount> {
        self.robots.iter().find(|r| r.kind == kind)
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: u32) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    /// Highest surface at `(x, y)` not above `z`: drop zones, the table top, or the floor.
    /// Surfaces up to [`SURFACE_SNAP`] above `z` still count.
    pub fn support_below(&self, x: f64, y: f64, z: f64) -> f64 {
        let mut best = 0.0;
        if self.table.contains_xy(x, y) && self.table.top() <= z + SURFACE_SNAP {
            best = self.table.top();
        }
        for r in &self.robots {
            let dz = &r.drop_zone;
            if dz.contains_xy(x, y) && dz.surface <= z + SURFACE_SNAP && dz.surface > best {
                best = dz.surface;
            }
        }
        best
    }

    /// Puts a released object down on whatever is below it.
    pub fn settle_object(&mut self, id: u32) {
        let Some(idx) = self.objects.iter().position(|o| o.id == id) else {
            return;
        };
        let (x, y, bottom) = {
            let o = &self.objects[idx];
            (o.position.x, o.position.y, o.position.z - o.shape.height() / 2.0)
        };
        let support = self.support_below(x, y, bottom);
        let o = &mut self.objects[idx];
        o.position.z = support + o.shape.height() / 2.0;
        o.support = Some(support);
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.table.is_valid() || !self.collision_cube.is_valid() {
            return Err("table and collision cube must have positive extents".into());
        }
        // the cube models the body under the top, so it may not poke through it
        if self.collision_cube.max[2] > self.table.top() + 1e-9 || !self.table.contains_box(&self.collision_cube) {
            return Err("collision cube must lie under the table top".into());
        }
        for o in &self.objects {
            let Some(support) = o.support else {
                return Err(format!("object {} must rest on a surface", o.id));
            };
            if (o.position.z - (support + o.shape.height() / 2.0)).abs() > 1e-6 {
                return Err(format!("object {} is not resting on its support", o.id));
            }
        }
        let mut kinds: Vec<_> = self.robots.iter().map(|r| r.kind).collect();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.robots.len() {
            return Err("each robot may be mounted once".into());
        }
        if !(self.camera.range > 0.0 && self.camera.period > 0.0) {
            return Err("camera range and period must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_scene() -> Scene {
        Scene {
            table: Aabb::new([0.5, -1.0, 0.0], [1.2, 1.0, 0.5]),
            collision_cube: Aabb::new([0.52, -0.98, 0.0], [1.18, 0.98, 0.5]),
            camera: Camera::default(),
            robots: vec![],
            objects: vec![SceneObject {
                id: 1,
                shape: Shape::Box { size: [0.04, 0.04, 0.06] },
                position: Vector3::new(0.7, 0.0, 0.53),
                yaw: 0.0,
                support: Some(0.5),
            }],
        }
    }

    #[test]
    fn valid_scene() {
        assert!(table_scene().validate().is_ok());
    }

    #[test]
    fn cube_above_table_rejected() {
        let mut s = table_scene();
        s.collision_cube.max[2] = 0.6;
        assert!(s.validate().is_err());
    }

    #[test]
    fn floating_object_rejected() {
        let mut s = table_scene();
        s.objects[0].position.z = 0.7;
        assert!(s.validate().is_err());
    }

    #[test]
    fn released_object_lands_on_table_or_floor() {
        let mut s = table_scene();
        s.objects[0].position = Vector3::new(0.8, 0.2, 0.9);
        s.objects[0].support = None;
        s.settle_object(1);
        assert!((s.objects[0].position.z - 0.53).abs() < 1e-12);
        s.objects[0].position = Vector3::new(0.2, 0.2, 0.9);
        s.settle_object(1);
        assert!((s.objects[0].position.z - 0.03).abs() < 1e-12);
        assert_eq!(s.objects[0].support, Some(0.0));
    }

    #[test]
    fn box_width_projection() {
        let shape = Shape::Box { size: [0.06, 0.04, 0.05] };
        assert!((shape.width_along(&Vector3::y()) - 0.04).abs() < 1e-12);
        assert!((shape.width_along(&Vector3::x()) - 0.06).abs() < 1e-12);
        let c = Shape::Cylinder { radius: 0.02, height: 0.1 };
        assert_eq!(c.width_along(&Vector3::x()), 0.04);
    }
}
