//! Deterministic simulation of both arms on the shared table scene.
//!
//! A [`World`] is advanced one fixed tick at a time by a single owner. Commands are
//! applied between ticks; readers take [`WorldSnapshot`] copies.

pub mod grasp;
pub mod perception;
pub mod planning;
pub mod rtf;
pub mod scene;

use nalgebra::{Isometry3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grasp::{FailureReason, GraspSequenceState, Phase, StatusFlags};
pub use perception::{in_perception_volume, perceive, Detection, PerceivedObject, Perception};
pub use planning::{plan_pick_place, segment_intersects_aabb, Plan, PlanError, Waypoint, WaypointKind};
pub use rtf::{RtfMeter, TickClock};
pub use scene::{Aabb, Camera, DropZone, RobotMount, Scene, SceneObject, Shape};

use crate::control::{
    step_effort, step_position, EffortControllerConfig, FingerContacts, PositionControllerConfig, RobotState, FINGER_MAX,
};
use crate::kinematics::{link_frames, tool_isometry, IkParams, JointVector, KinematicModel, Pose};
use crate::RobotKind;

/// Largest lateral offset between the tool centre point and an object centroid at
/// which the fingers still close on the object, m.
pub const GRASP_CAPTURE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspConfig {
    /// Largest joint travel between consecutive carried waypoints the grip survives, degrees.
    pub theta_drop_deg: f64,
    /// Give up if no object is perceived this long after Start, s.
    pub perceive_timeout: f64,
    /// Give up if the grip is not stable this long after the fingers start closing, s.
    pub grasp_timeout: f64,
}

impl Default for GraspConfig {
    fn default() -> Self {
        GraspConfig {
            theta_drop_deg: 60.0,
            perceive_timeout: 12.0,
            grasp_timeout: 2.0,
        }
    }
}

impl GraspConfig {
    pub fn theta_drop(&self) -> f64 {
        self.theta_drop_deg.to_radians()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub scene: Scene,
    #[serde(default)]
    pub position: PositionControllerConfig,
    #[serde(default)]
    pub effort: EffortControllerConfig,
    #[serde(default)]
    pub ik: IkParams,
    #[serde(default)]
    pub grasp: GraspConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("invalid controller settings: {0}")]
    Controller(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Position setpoint for one joint, 0-based, radians.
    SetJoint { robot: RobotKind, joint: usize, value: f64 },
    SetJoints { robot: RobotKind, q: JointVector },
    /// Opening of one finger from the centre line, m.
    SetFinger { robot: RobotKind, finger: usize, value: f64 },
    GraspStart { robot: RobotKind },
    GraspStop { robot: RobotKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandOutcome {
    Applied,
    /// Applied after clamping to the joint or finger range.
    Clamped,
    /// Start while a run is already active.
    Ignored,
    Rejected(String),
}

/// One simulated arm with its controller state and autonomous sequence.
#[derive(Debug, Clone)]
pub struct Arm {
    pub model: KinematicModel,
    pub mount: RobotMount,
    pub state: RobotState,
    pub sequence: GraspSequenceState,
    pub plan: Option<Plan>,
    /// Object pose in the tool frame while attached.
    grasp_offset: Option<Isometry3<f64>>,
    drop_pending: bool,
    segment_start: JointVector,
    waypoint: usize,
    fingers_released: bool,
}

impl Arm {
    fn new(mount: RobotMount) -> Arm {
        let model = KinematicModel::builtin(mount.kind);
        let state = RobotState::at_home(&model);
        Arm {
            segment_start: model.home().clone(),
            model,
            mount,
            state,
            sequence: GraspSequenceState::default(),
            plan: None,
            grasp_offset: None,
            drop_pending: false,
            waypoint: 0,
            fingers_released: false,
        }
    }

    pub fn kind(&self) -> RobotKind {
        self.model.kind()
    }

    /// Tool frame in world coordinates.
    pub fn tool_world(&self) -> Isometry3<f64> {
        self.mount.isometry() * tool_isometry(&self.model, &self.state.q).expect("state matches model")
    }

    /// Tool pose in the robot base frame.
    pub fn tool_pose(&self) -> Pose {
        Pose::from_isometry(&tool_isometry(&self.model, &self.state.q).expect("state matches model"))
    }

    /// World-frame origins of every link frame and the tool.
    pub fn link_origins(&self) -> Vec<Vector3<f64>> {
        let base = self.mount.isometry();
        link_frames(&self.model, &self.state.q)
            .expect("state matches model")
            .iter()
            .map(|f| (base * f).translation.vector)
            .collect()
    }

    fn go_to(&mut self, q: &JointVector) {
        self.segment_start = self.state.q.clone();
        self.state.q_setpoint = q.clone();
    }

    fn go_to_waypoint(&mut self, idx: usize) {
        self.waypoint = idx;
        let q = self.plan.as_ref().expect("plan present").waypoints[idx].q.clone();
        self.go_to(&q);
    }

    fn go_home(&mut self) {
        let home = self.model.home().clone();
        self.go_to(&home);
        self.state.finger_setpoints = [FINGER_MAX; 2];
    }

    /// Fraction of the current joint-space segment already covered.
    fn segment_progress(&self) -> f64 {
        let total = self.segment_start.max_abs_diff(&self.state.q_setpoint);
        if total == 0.0 {
            return 1.0;
        }
        1.0 - self.state.q.max_abs_diff(&self.state.q_setpoint) / total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSnapshot {
    pub robot: RobotKind,
    pub state: RobotState,
    /// Tool pose in the robot base frame.
    pub tool: Pose,
    pub sequence: GraspSequenceState,
    pub status_word: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub time: f64,
    pub ticks: u64,
    pub arms: Vec<ArmSnapshot>,
    pub objects: Vec<SceneObject>,
    pub last_perception: Option<f64>,
    pub detections: Vec<PerceivedObject>,
}

/// What happened during one tick that observers may care about.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickEvents {
    pub perception: Option<Vec<PerceivedObject>>,
    pub phase_changes: Vec<(RobotKind, Phase)>,
}

#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    scene: Scene,
    arms: Vec<Arm>,
    time: f64,
    ticks: u64,
    last_perception: Option<f64>,
    detections: Vec<PerceivedObject>,
}

impl World {
    pub fn new(config: WorldConfig) -> Result<World, WorldError> {
        config.scene.validate().map_err(WorldError::Scene)?;
        config.position.validate().map_err(WorldError::Controller)?;
        config.effort.validate().map_err(WorldError::Controller)?;
        let arms = config.scene.robots.iter().map(|m| Arm::new(*m)).collect();
        Ok(World {
            scene: config.scene.clone(),
            config,
            arms,
            time: 0.0,
            ticks: 0,
            last_perception: None,
            detections: vec![],
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn arm(&self, kind: RobotKind) -> Option<&Arm> {
        self.arms.iter().find(|a| a.kind() == kind)
    }

    fn arm_index(&self, kind: RobotKind) -> Option<usize> {
        self.arms.iter().position(|a| a.kind() == kind)
    }

    pub fn detections(&self) -> &[PerceivedObject] {
        &self.detections
    }

    pub fn last_perception(&self) -> Option<f64> {
        self.last_perception
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            time: self.time,
            ticks: self.ticks,
            arms: self
                .arms
                .iter()
                .map(|a| ArmSnapshot {
                    robot: a.kind(),
                    state: a.state.clone(),
                    tool: a.tool_pose(),
                    sequence: a.sequence.clone(),
                    status_word: a.sequence.status_word(),
                })
                .collect(),
            objects: self.scene.objects.clone(),
            last_perception: self.last_perception,
            detections: self.detections.clone(),
        }
    }

    pub fn apply(&mut self, command: &Command) -> CommandOutcome {
        let robot = match command {
            Command::SetJoint { robot, .. }
            | Command::SetJoints { robot, .. }
            | Command::SetFinger { robot, .. }
            | Command::GraspStart { robot }
            | Command::GraspStop { robot } => *robot,
        };
        let Some(idx) = self.arm_index(robot) else {
            return CommandOutcome::Rejected(format!("{robot} is not mounted"));
        };
        let now = self.time;
        match command {
            Command::SetJoint { joint, value, .. } => {
                let arm = &mut self.arms[idx];
                if *joint >= arm.model.dof() {
                    return CommandOutcome::Rejected(format!("{robot} has no joint {}", joint + 1));
                }
                if !value.is_finite() {
                    return CommandOutcome::Rejected("non-finite setpoint".into());
                }
                let (lo, hi) = arm.model.limits()[*joint];
                let clamped = value.clamp(lo, hi);
                arm.segment_start = arm.state.q.clone();
                arm.state.q_setpoint[*joint] = clamped;
                outcome(clamped == *value)
            }
            Command::SetJoints { q, .. } => {
                let arm = &mut self.arms[idx];
                if let Err(e) = arm.model.check_dim(q) {
                    return CommandOutcome::Rejected(e.to_string());
                }
                let clamped = arm.model.clamped(q);
                let exact = clamped == *q;
                arm.go_to(&clamped);
                outcome(exact)
            }
            Command::SetFinger { finger, value, .. } => {
                if *finger > 1 {
                    return CommandOutcome::Rejected(format!("no finger {}", finger + 1));
                }
                if !value.is_finite() {
                    return CommandOutcome::Rejected("non-finite setpoint".into());
                }
                let clamped = value.clamp(0.0, FINGER_MAX);
                self.arms[idx].state.finger_setpoints[*finger] = clamped;
                outcome(clamped == *value)
            }
            Command::GraspStart { .. } => {
                let arm = &mut self.arms[idx];
                if arm.sequence.phase.is_active() {
                    return CommandOutcome::Ignored;
                }
                arm.plan = None;
                arm.drop_pending = false;
                arm.sequence.begin(now);
                CommandOutcome::Applied
            }
            Command::GraspStop { .. } => {
                self.release(idx);
                let arm = &mut self.arms[idx];
                arm.plan = None;
                arm.go_home();
                arm.sequence.enter(Phase::Stopped, now);
                CommandOutcome::Applied
            }
        }
    }

    /// Link origins of every arm, world frame.
    pub fn link_origins(&self) -> Vec<Vector3<f64>> {
        self.arms.iter().flat_map(|a| a.link_origins()).collect()
    }

    /// Advances the simulation by `dt` seconds.
    pub fn step(&mut self, dt: f64) -> TickEvents {
        assert!(dt > 0.0, "tick must be positive");
        self.ticks += 1;
        self.time += dt;
        let mut events = TickEvents::default();

        for idx in 0..self.arms.len() {
            step_position(&mut self.arms[idx].state, &self.config.position, dt);
            self.carry(idx);
            let contacts = self.finger_contacts(idx);
            let before = self.arms[idx].state.attached_object;
            step_effort(&mut self.arms[idx].state, &self.config.effort, &contacts, dt);
            let after = self.arms[idx].state.attached_object;
            if before != after {
                if let Some(id) = before {
                    self.arms[idx].grasp_offset = None;
                    self.scene.settle_object(id);
                }
                if let Some(id) = after {
                    let tool = self.arms[idx].tool_world();
                    let obj = self.scene.object_mut(id).expect("contacts name scene objects");
                    self.arms[idx].grasp_offset = Some(tool.inverse() * obj.isometry());
                    obj.support = None;
                }
            }
        }

        let links = self.link_origins();
        if let Perception::Batch(batch) = perceive(&self.scene, &links, self.time, self.last_perception) {
            self.last_perception = Some(self.time);
            self.detections = batch.clone();
            events.perception = Some(batch);
        }

        for idx in 0..self.arms.len() {
            let before = self.arms[idx].sequence.phase;
            self.run_grasp_tick(idx);
            let after = self.arms[idx].sequence.phase;
            if before != after {
                events.phase_changes.push((self.arms[idx].kind(), after));
            }
        }
        events
    }

    /// Moves an attached object rigidly with the tool.
    fn carry(&mut self, idx: usize) {
        let arm = &self.arms[idx];
        if let (Some(id), Some(offset)) = (arm.state.attached_object, arm.grasp_offset) {
            let pose = arm.tool_world() * offset;
            if let Some(obj) = self.scene.object_mut(id) {
                obj.set_isometry(&pose);
            }
        }
    }

    /// Lets go of whatever the arm holds; the object falls onto the surface below.
    fn release(&mut self, idx: usize) {
        let arm = &mut self.arms[idx];
        arm.state.grasp_hold = 0.0;
        arm.grasp_offset = None;
        if let Some(id) = arm.state.attached_object.take() {
            self.scene.settle_object(id);
        }
    }

    fn finger_contacts(&self, idx: usize) -> FingerContacts {
        let arm = &self.arms[idx];
        let tool = arm.tool_world();
        let held_elsewhere: Vec<u32> = self
            .arms
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .filter_map(|(_, a)| a.state.attached_object)
            .collect();
        for obj in &self.scene.objects {
            if held_elsewhere.contains(&obj.id) {
                continue;
            }
            let local = tool.inverse_transform_point(&obj.position.into());
            if local.x.abs() > GRASP_CAPTURE || local.y.abs() > GRASP_CAPTURE || local.z.abs() > obj.shape.height() / 2.0 {
                continue;
            }
            let closing = obj.isometry().inverse_transform_vector(&(tool.rotation * Vector3::y()));
            let horizontal = Vector3::new(closing.x, closing.y, 0.0);
            if horizontal.norm() < 1e-6 {
                continue;
            }
            let half = obj.shape.width_along(&horizontal.normalize()) / 2.0;
            let surfaces = [half + local.y, half - local.y];
            if surfaces.iter().all(|s| *s > 0.0 && *s <= FINGER_MAX) {
                return FingerContacts {
                    surfaces: surfaces.map(Some),
                    object: Some(obj.id),
                };
            }
        }
        FingerContacts::none()
    }

    fn fail(&mut self, idx: usize, reason: FailureReason) {
        let now = self.time;
        self.release(idx);
        let arm = &mut self.arms[idx];
        arm.plan = None;
        arm.go_home();
        arm.sequence.fail(reason, now);
    }

    /// Advances the autonomous pick-and-place sequence of one arm.
    fn run_grasp_tick(&mut self, idx: usize) {
        let now = self.time;
        let cfg = self.config.grasp;
        let settled = self.arms[idx].state.settled(&self.config.position);
        match self.arms[idx].sequence.phase {
            Phase::Idle | Phase::Done | Phase::Stopped | Phase::Failed => {}
            Phase::Perceive => {
                let run_started = self.arms[idx].sequence.run_started;
                if self.last_perception.is_some_and(|t| t >= run_started) {
                    if let Some(target) = self.choose_target(idx) {
                        let arm = &mut self.arms[idx];
                        arm.sequence.target = target.object_id();
                        arm.sequence.flags.perceived = true;
                        arm.sequence.enter(Phase::Plan, now);
                        return;
                    }
                }
                if now - run_started > cfg.perceive_timeout {
                    self.fail(idx, FailureReason::NotPerceived);
                }
            }
            Phase::Plan => {
                let arm = &self.arms[idx];
                let target = arm
                    .sequence
                    .target
                    .and_then(|id| self.detections.iter().find(|d| d.object_id() == Some(id)).cloned());
                let Some(target) = target else {
                    self.fail(idx, FailureReason::NotPerceived);
                    return;
                };
                match plan_pick_place(&self.scene, &arm.model, &arm.state.q, &target, &self.config.ik) {
                    Ok(plan) => {
                        let arm = &mut self.arms[idx];
                        arm.drop_pending = plan.carried_travel() > cfg.theta_drop();
                        arm.plan = Some(plan);
                        arm.sequence.flags.planned = true;
                        arm.state.finger_setpoints = [FINGER_MAX; 2];
                        arm.go_to_waypoint(0);
                        arm.sequence.enter(Phase::Approach, now);
                    }
                    Err(PlanError::Collision(_)) => self.fail(idx, FailureReason::Collision),
                    Err(PlanError::Unreachable(_)) | Err(PlanError::UnknownRobot) => {
                        self.fail(idx, FailureReason::Unreachable)
                    }
                    Err(PlanError::SpuriousTarget) | Err(PlanError::UnknownObject) => {
                        self.fail(idx, FailureReason::NotPerceived)
                    }
                }
            }
            Phase::Approach => {
                if settled {
                    let arm = &mut self.arms[idx];
                    if arm.waypoint == 0 {
                        arm.go_to_waypoint(1);
                    } else {
                        arm.state.finger_setpoints = [0.0; 2];
                        arm.sequence.enter(Phase::Grasp, now);
                    }
                }
            }
            Phase::Grasp => {
                let arm = &mut self.arms[idx];
                if arm.state.attached_object.is_some() && arm.state.attached_object == arm.sequence.target {
                    arm.sequence.flags.grasped = true;
                    arm.go_to_waypoint(2);
                    arm.sequence.enter(Phase::Lift, now);
                    return;
                }
                if now - arm.sequence.phase_started > cfg.grasp_timeout {
                    self.fail(idx, FailureReason::GraspFailed);
                }
            }
            Phase::Lift => {
                if settled {
                    let arm = &mut self.arms[idx];
                    arm.go_to_waypoint(3);
                    arm.sequence.enter(Phase::Transport, now);
                }
            }
            Phase::Transport => {
                if self.arms[idx].drop_pending && self.arms[idx].segment_progress() >= 0.5 {
                    self.fail(idx, FailureReason::Dropped);
                } else if settled {
                    let arm = &mut self.arms[idx];
                    arm.go_to_waypoint(4);
                    arm.fingers_released = false;
                    arm.sequence.enter(Phase::Place, now);
                }
            }
            Phase::Place => {
                let arm = &mut self.arms[idx];
                if !settled {
                    return;
                }
                if !arm.fingers_released {
                    arm.state.finger_setpoints = [FINGER_MAX; 2];
                    arm.fingers_released = true;
                    return;
                }
                if arm.state.attached_object.is_some() {
                    return;
                }
                let target = arm.sequence.target;
                let zone = arm.mount.drop_zone;
                let placed = target
                    .and_then(|id| self.scene.object(id))
                    .is_some_and(|o| zone.contains_xy(o.position.x, o.position.y) && o.support == Some(zone.surface));
                if placed {
                    let arm = &mut self.arms[idx];
                    arm.sequence.flags.placed = true;
                    arm.go_to_waypoint(5);
                    arm.sequence.enter(Phase::Retreat, now);
                } else {
                    self.fail(idx, FailureReason::Misplaced);
                }
            }
            Phase::Retreat => {
                if settled {
                    self.arms[idx].sequence.enter(Phase::Done, now);
                }
            }
        }
    }

    /// Nearest perceived object to the arm's base that is neither held nor already
    /// in a drop zone.
    fn choose_target(&self, idx: usize) -> Option<PerceivedObject> {
        let base = Vector3::from(self.arms[idx].mount.base);
        let held: Vec<u32> = self.arms.iter().filter_map(|a| a.state.attached_object).collect();
        self.detections
            .iter()
            .filter(|d| !d.is_spurious())
            .filter(|d| d.object_id().is_some_and(|id| !held.contains(&id)))
            .filter(|d| {
                !self
                    .scene
                    .robots
                    .iter()
                    .any(|r| r.drop_zone.contains_xy(d.centroid.x, d.centroid.y))
            })
            .min_by(|a, b| {
                let da = (a.centroid - base).xy().norm();
                let db = (b.centroid - base).xy().norm();
                da.total_cmp(&db)
            })
            .cloned()
    }
}

fn outcome(exact: bool) -> CommandOutcome {
    if exact {
        CommandOutcome::Applied
    } else {
        CommandOutcome::Clamped
    }
}
