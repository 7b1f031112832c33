use std::f64::consts::PI;

use nalgebra::{Isometry3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::perception::PerceivedObject;
use super::scene::{Aabb, Scene, SceneObject};
use crate::kinematics::{forward_kinematics, inverse_kinematics, IkParams, JointVector, KinematicModel, Pose};
use crate::RobotKind;

/// Height of the pre-grasp point above the object centroid, m.
pub const PRE_GRASP_HEIGHT: f64 = 0.10;
/// Height of the lift and transport points above the grasp point, m.
pub const LIFT_HEIGHT: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointKind {
    PreGrasp,
    Grasp,
    Lift,
    Transport,
    Place,
    Retreat,
}

impl WaypointKind {
    pub const ORDER: [WaypointKind; 6] = [
        WaypointKind::PreGrasp,
        WaypointKind::Grasp,
        WaypointKind::Lift,
        WaypointKind::Transport,
        WaypointKind::Place,
        WaypointKind::Retreat,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub kind: WaypointKind,
    /// Tool pose in the robot base frame.
    pub pose: Pose,
    pub q: JointVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub robot: RobotKind,
    pub object: u32,
    pub waypoints: Vec<Waypoint>,
}

impl Plan {
    pub fn waypoint(&self, kind: WaypointKind) -> &Waypoint {
        &self.waypoints[WaypointKind::ORDER.iter().position(|k| *k == kind).expect("every kind is planned")]
    }

    /// Largest joint travel between consecutive waypoints while the object is held
    /// (grasp to lift, lift to transport, transport to place), radians.
    pub fn carried_travel(&self) -> f64 {
        self.waypoints[1..5]
            .windows(2)
            .map(|w| crate::kinematics::solution_complexity(&w[0].q, &w[1].q).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanError {
    #[error("waypoint {0:?} is unreachable")]
    Unreachable(WaypointKind),
    #[error("path segment into {0:?} crosses the table body")]
    Collision(WaypointKind),
    #[error("target is a self-detection")]
    SpuriousTarget,
    #[error("target object is not in the scene")]
    UnknownObject,
    #[error("robot is not mounted in the scene")]
    UnknownRobot,
}

/// Slab test: does the closed segment `a`-`b` touch the box?
pub fn segment_intersects_aabb(a: &Vector3<f64>, b: &Vector3<f64>, aabb: &Aabb) -> bool {
    let d = b - a;
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for i in 0..3 {
        if d[i].abs() < 1e-15 {
            if a[i] < aabb.min[i] || a[i] > aabb.max[i] {
                return false;
            }
            continue;
        }
        let inv = 1.0 / d[i];
        let mut near = (aabb.min[i] - a[i]) * inv;
        let mut far = (aabb.max[i] - a[i]) * inv;
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Gripper pointing straight down, rotated `yaw` about world z.
pub fn top_down(yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw) * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI)
}

/// Yaw of a top-down tool frame about world z.
pub fn tool_yaw(rotation: &UnitQuaternion<f64>) -> f64 {
    let x = rotation * Vector3::x();
    x.y.atan2(x.x)
}

/// Of the two equivalent grasp yaws `yaw` and `yaw + pi`, the one closest to `reference`.
fn nearest_symmetric_yaw(yaw: f64, reference: f64) -> f64 {
    let wrap = |a: f64| (a + PI).rem_euclid(2.0 * PI) - PI;
    let a = wrap(yaw);
    let b = wrap(yaw + PI);
    if wrap(a - reference).abs() <= wrap(b - reference).abs() {
        a
    } else {
        b
    }
}

/// Grasp yaw for an object: fingers close across the object's y extent for boxes,
/// any direction for cylinders.
pub fn grasp_yaw(object: &SceneObject, reference: f64) -> f64 {
    match object.shape {
        super::scene::Shape::Box { .. } => nearest_symmetric_yaw(object.yaw, reference),
        super::scene::Shape::Cylinder { .. } => reference,
    }
}

/// Pre-grasp, grasp, lift, transport, place and retreat-home waypoints for moving
/// `target` into the robot's drop zone. Each pose is solved by inverse kinematics
/// seeded with the previous solution, starting from `current`.
pub fn plan_pick_place(
    scene: &Scene,
    model: &KinematicModel,
    current: &JointVector,
    target: &PerceivedObject,
    ik: &IkParams,
) -> Result<Plan, PlanError> {
    let id = target.object_id().ok_or(PlanError::SpuriousTarget)?;
    let object = scene.object(id).ok_or(PlanError::UnknownObject)?;
    let mount = scene.mount(model.kind()).ok_or(PlanError::UnknownRobot)?;
    let base = mount.isometry();
    let to_base = base.inverse();

    let home_tool = base * forward_kinematics(model, model.home()).map_err(|_| PlanError::UnknownRobot)?.to_isometry();
    let dz = &mount.drop_zone;
    let centroid = target.centroid;
    let half_height = object.shape.height() / 2.0;
    let place_at = Vector3::new(dz.center[0], dz.center[1], dz.surface + half_height);

    // yaw the tool would have if the home pose were swung about the base axis
    let bearing = |p: &Vector3<f64>| (p.y - base.translation.y).atan2(p.x - base.translation.x);
    let object_bearing = bearing(&centroid);
    let reference = tool_yaw(&home_tool.rotation) + object_bearing - bearing(&home_tool.translation.vector);
    let yaw = grasp_yaw(object, reference);
    let grasp_rot = top_down(yaw);
    // keep the grip fixed relative to the base while swinging over to the zone
    let place_rot = top_down(yaw + bearing(&place_at) - object_bearing);

    let world_targets = [
        (WaypointKind::PreGrasp, centroid + Vector3::z() * PRE_GRASP_HEIGHT, grasp_rot),
        (WaypointKind::Grasp, centroid, grasp_rot),
        (WaypointKind::Lift, centroid + Vector3::z() * LIFT_HEIGHT, grasp_rot),
        (WaypointKind::Transport, place_at + Vector3::z() * LIFT_HEIGHT, place_rot),
        (WaypointKind::Place, place_at, place_rot),
    ];

    let start_tool = base
        * forward_kinematics(model, current)
            .map_err(|_| PlanError::UnknownRobot)?
            .to_isometry();
    let mut path: Vec<(WaypointKind, Vector3<f64>)> = vec![];
    path.extend(world_targets.iter().map(|(k, p, _)| (*k, *p)));
    path.push((WaypointKind::Retreat, home_tool.translation.vector));
    let mut prev = start_tool.translation.vector;
    for (kind, p) in &path {
        if segment_intersects_aabb(&prev, p, &scene.collision_cube) {
            return Err(PlanError::Collision(*kind));
        }
        prev = *p;
    }

    let mut seed = current.clone();
    let mut waypoints = Vec::with_capacity(6);
    for (kind, p, rot) in world_targets {
        let world = Isometry3::from_parts(p.into(), rot);
        let pose = Pose::from_isometry(&(to_base * world));
        let result = inverse_kinematics(model, &pose, &seed, ik).map_err(|_| PlanError::Unreachable(kind))?;
        if !result.converged() {
            return Err(PlanError::Unreachable(kind));
        }
        seed = result.q.clone();
        waypoints.push(Waypoint { kind, pose, q: result.q });
    }
    waypoints.push(Waypoint {
        kind: WaypointKind::Retreat,
        pose: Pose::from_isometry(&(to_base * home_tool)),
        q: model.home().clone(),
    });
    Ok(Plan {
        robot: model.kind(),
        object: id,
        waypoints,
    })
}
