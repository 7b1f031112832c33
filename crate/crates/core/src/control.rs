//! Simulated joint position controllers and the gripper effort controller.
//!
//! Joints follow a first-order, rate-limited law that never overshoots. The two
//! fingers move kinematically until they meet an object surface, then push with a
//! spring force; a grasp counts once both fingers have held at least the threshold
//! force for the hold time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::kinematics::{JointVector, KinematicModel};

/// Fully open finger, metres from the gripper centre line.
pub const FINGER_MAX: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PositionControllerConfig {
    /// Proportional gain, 1/s.
    pub gain: f64,
    /// rad/s.
    pub velocity_limit: f64,
    /// rad.
    pub settle_tolerance: f64,
    /// Speed floor near the setpoint, rad/s. Turns the exponential tail into a
    /// finite-time arrival.
    pub min_speed: f64,
}

impl Default for PositionControllerConfig {
    fn default() -> Self {
        PositionControllerConfig {
            gain: 10.0,
            velocity_limit: PI,
            settle_tolerance: 1e-4,
            min_speed: 0.05,
        }
    }
}

impl PositionControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let all_positive = [self.gain, self.velocity_limit, self.settle_tolerance]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive || !(self.min_speed >= 0.0 && self.min_speed <= self.velocity_limit) {
            return Err(format!("invalid position controller config {self:?}"));
        }
        Ok(())
    }

    /// Upper bound on the time to come within `settle_tolerance` of a setpoint `distance` away.
    pub fn settle_time_bound(&self, distance: f64) -> f64 {
        distance.abs() / self.velocity_limit + 5.0 / self.gain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffortControllerConfig {
    /// N/m.
    pub stiffness: f64,
    /// N.
    pub max_force: f64,
    /// Force both fingers must reach before the grasp counts, N.
    pub hold_threshold: f64,
    /// s.
    pub hold_time: f64,
    /// Free finger speed, m/s.
    pub finger_speed: f64,
}

impl Default for EffortControllerConfig {
    fn default() -> Self {
        EffortControllerConfig {
            stiffness: 500.0,
            max_force: 20.0,
            hold_threshold: 2.0,
            hold_time: 0.2,
            finger_speed: 0.1,
        }
    }
}

impl EffortControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let ok = self.stiffness > 0.0
            && self.max_force > 0.0
            && self.hold_threshold > 0.0
            && self.hold_threshold < self.max_force
            && self.hold_time > 0.0
            && self.finger_speed > 0.0;
        if ok {
            Ok(())
        } else {
            Err(format!("invalid effort controller config {self:?}"))
        }
    }
}

/// What each finger can touch this tick: the distance from the gripper centre line
/// to the object surface on that side, if the finger can reach it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FingerContacts {
    pub surfaces: [Option<f64>; 2],
    pub object: Option<u32>,
}

impl FingerContacts {
    pub fn none() -> Self {
        Self::default()
    }

    /// An object of `width` centred between the fingers.
    pub fn centered(width: f64, object: u32) -> Self {
        FingerContacts {
            surfaces: [Some(width / 2.0); 2],
            object: Some(object),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub q: JointVector,
    pub q_setpoint: JointVector,
    /// Metres from the centre line, each in `[0, FINGER_MAX]`.
    pub fingers: [f64; 2],
    pub finger_setpoints: [f64; 2],
    /// N, never negative.
    pub finger_forces: [f64; 2],
    pub attached_object: Option<u32>,
    /// Time both fingers have been above the hold threshold, s.
    pub grasp_hold: f64,
}

impl RobotState {
    /// At rest in the model's home configuration with the gripper open.
    pub fn at_home(model: &KinematicModel) -> Self {
        RobotState {
            q: model.home().clone(),
            q_setpoint: model.home().clone(),
            fingers: [FINGER_MAX; 2],
            finger_setpoints: [FINGER_MAX; 2],
            finger_forces: [0.0; 2],
            attached_object: None,
            grasp_hold: 0.0,
        }
    }

    pub fn settled(&self, cfg: &PositionControllerConfig) -> bool {
        self.q.max_abs_diff(&self.q_setpoint) <= cfg.settle_tolerance
    }

    pub fn grasp_stable(&self) -> bool {
        self.attached_object.is_some()
    }
}

/// Advances every joint toward its setpoint by one tick.
pub fn step_position(state: &mut RobotState, cfg: &PositionControllerConfig, dt: f64) {
    debug_assert!(dt > 0.0);
    for (q, target) in state.q.iter_mut().zip(state.q_setpoint.iter()) {
        let error = target - *q;
        if error == 0.0 {
            continue;
        }
        let speed = (cfg.gain * error.abs()).max(cfg.min_speed).min(cfg.velocity_limit);
        let step = speed * dt;
        if step >= error.abs() {
            *q = *target;
        } else {
            *q += step.copysign(error);
        }
    }
}

/// Advances both fingers by one tick and updates forces and grasp state.
pub fn step_effort(state: &mut RobotState, cfg: &EffortControllerConfig, contacts: &FingerContacts, dt: f64) {
    debug_assert!(dt > 0.0);
    let max_move = cfg.finger_speed * dt;
    for i in 0..2 {
        let setpoint = state.finger_setpoints[i].clamp(0.0, FINGER_MAX);
        let pos = state.fingers[i];
        let mut next = if (setpoint - pos).abs() <= max_move {
            setpoint
        } else {
            pos + max_move.copysign(setpoint - pos)
        };
        let mut force = 0.0;
        if let Some(surface) = contacts.surfaces[i] {
            // the finger cannot pass the surface it is closing onto
            if next <= surface && setpoint < surface {
                next = surface;
                force = (cfg.stiffness * (surface - setpoint)).clamp(0.0, cfg.max_force);
            }
        }
        state.fingers[i] = next.clamp(0.0, FINGER_MAX);
        state.finger_forces[i] = force;
    }

    let both_holding = state.finger_forces.iter().all(|f| *f >= cfg.hold_threshold);
    if both_holding && contacts.object.is_some() {
        state.grasp_hold += dt;
        if state.grasp_hold + 1e-9 >= cfg.hold_time {
            state.attached_object = contacts.object;
        }
    } else {
        state.grasp_hold = 0.0;
        state.attached_object = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RobotKind;

    fn single_joint(q: f64, set: f64) -> RobotState {
        RobotState {
            q: JointVector(vec![q]),
            q_setpoint: JointVector(vec![set]),
            fingers: [FINGER_MAX; 2],
            finger_setpoints: [FINGER_MAX; 2],
            finger_forces: [0.0; 2],
            attached_object: None,
            grasp_hold: 0.0,
        }
    }

    #[test]
    fn fixpoint_is_unchanged() {
        let mut s = single_joint(0.7, 0.7);
        step_position(&mut s, &PositionControllerConfig::default(), 1e-3);
        assert_eq!(s.q[0], 0.7);
    }

    #[test]
    fn rate_limited_first_step() {
        let mut s = single_joint(0.0, 1.0);
        step_position(&mut s, &PositionControllerConfig::default(), 1e-3);
        // k * error = 10 > pi, so the step is v_max * dt
        assert!((s.q[0] - PI * 1e-3).abs() < 1e-15);
        assert!((s.q[0] - 0.00314).abs() < 5e-6);
    }

    #[test]
    fn settle_bound_holds_over_sweep() {
        let cfg = PositionControllerConfig::default();
        let dt = 1e-3;
        for i in 0..=60 {
            let distance = -3.0 + 0.1 * i as f64 + 1e-3;
            let mut s = single_joint(0.0, distance);
            let bound = cfg.settle_time_bound(distance);
            let ticks = (bound / dt).ceil() as usize;
            let mut prev_sign = distance.signum();
            for _ in 0..ticks {
                step_position(&mut s, &cfg, dt);
                let e = s.q_setpoint[0] - s.q[0];
                // never crosses the setpoint
                assert!(e == 0.0 || e.signum() == prev_sign);
                if e != 0.0 {
                    prev_sign = e.signum();
                }
            }
            assert!((s.q[0] - distance).abs() <= cfg.settle_tolerance, "distance {distance}");
        }
    }

    #[test]
    fn fingers_open_without_contact_feel_nothing() {
        let m = KinematicModel::builtin(RobotKind::Panda);
        let mut s = RobotState::at_home(&m);
        let cfg = EffortControllerConfig::default();
        for _ in 0..500 {
            step_effort(&mut s, &cfg, &FingerContacts::none(), 1e-3);
        }
        assert_eq!(s.finger_forces, [0.0, 0.0]);
        assert_eq!(s.attached_object, None);
        assert_eq!(s.fingers, [FINGER_MAX; 2]);
    }

    #[test]
    fn squeezing_a_4cm_object_attaches_after_hold_time() {
        let m = KinematicModel::builtin(RobotKind::Panda);
        let mut s = RobotState::at_home(&m);
        s.fingers = [0.02; 2];
        s.finger_setpoints = [0.0; 2];
        let cfg = EffortControllerConfig::default();
        let contacts = FingerContacts::centered(0.04, 7);
        // equilibrium force: min(max_force, stiffness * interpenetration) = min(20, 500 * 0.02) = 10 N
        for tick in 1..=199 {
            step_effort(&mut s, &cfg, &contacts, 1e-3);
            assert_eq!(s.finger_forces, [10.0, 10.0]);
            assert_eq!(s.attached_object, None, "tick {tick}");
        }
        step_effort(&mut s, &cfg, &contacts, 1e-3);
        assert_eq!(s.attached_object, Some(7));
        assert_eq!(s.fingers, [0.02, 0.02]);
    }

    #[test]
    fn force_saturates_at_max() {
        let m = KinematicModel::builtin(RobotKind::Ur5);
        let mut s = RobotState::at_home(&m);
        s.finger_setpoints = [0.0; 2];
        let cfg = EffortControllerConfig::default();
        let contacts = FingerContacts::centered(0.08, 1);
        step_effort(&mut s, &cfg, &contacts, 1e-3);
        assert_eq!(s.finger_forces, [20.0, 20.0]);
    }

    #[test]
    fn single_contact_never_attaches() {
        let m = KinematicModel::builtin(RobotKind::Panda);
        let mut s = RobotState::at_home(&m);
        s.finger_setpoints = [0.0; 2];
        let cfg = EffortControllerConfig::default();
        let contacts = FingerContacts {
            surfaces: [Some(0.02), None],
            object: Some(3),
        };
        for _ in 0..5000 {
            step_effort(&mut s, &cfg, &contacts, 1e-3);
            assert!(s.finger_forces.iter().all(|f| *f >= 0.0 && *f <= cfg.max_force));
        }
        assert_eq!(s.attached_object, None);
        assert!(s.finger_forces[0] > 0.0);
        assert_eq!(s.finger_forces[1], 0.0);
    }

    #[test]
    fn opening_releases_the_object() {
        let m = KinematicModel::builtin(RobotKind::Panda);
        let mut s = RobotState::at_home(&m);
        s.finger_setpoints = [0.0; 2];
        let cfg = EffortControllerConfig::default();
        let contacts = FingerContacts::centered(0.03, 2);
        for _ in 0..1000 {
            step_effort(&mut s, &cfg, &contacts, 1e-3);
        }
        assert_eq!(s.attached_object, Some(2));
        s.finger_setpoints = [FINGER_MAX; 2];
        step_effort(&mut s, &cfg, &contacts, 1e-3);
        assert_eq!(s.attached_object, None);
        assert_eq!(s.finger_forces, [0.0, 0.0]);
    }

    #[test]
    fn configs_validate() {
        assert!(PositionControllerConfig::default().validate().is_ok());
        assert!(EffortControllerConfig::default().validate().is_ok());
        let bad = EffortControllerConfig {
            hold_threshold: 25.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
