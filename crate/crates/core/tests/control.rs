use proptest::prelude::*;
use teleop_core::control::{
    step_effort, step_position, EffortControllerConfig, FingerContacts, PositionControllerConfig, RobotState, FINGER_MAX,
};
use teleop_core::kinematics::{JointVector, KinematicModel};
use teleop_core::RobotKind;

const DT: f64 = 0.001;

fn arb_setpoint(kind: RobotKind) -> impl Strategy<Value = Vec<f64>> {
    KinematicModel::builtin(kind)
        .limits()
        .iter()
        .map(|(lo, hi)| *lo..=*hi)
        .collect::<Vec<_>>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn setpoints_are_reached_within_the_bound(target in arb_setpoint(RobotKind::Panda)) {
        let cfg = PositionControllerConfig::default();
        let model = KinematicModel::builtin(RobotKind::Panda);
        let mut state = RobotState::at_home(&model);
        state.q_setpoint = JointVector(target.clone());
        let distance = state.q.max_abs_diff(&state.q_setpoint);
        let ticks = (cfg.settle_time_bound(distance) / DT).ceil() as usize;
        let mut prev = state.q.max_abs_diff(&state.q_setpoint);
        for _ in 0..ticks {
            step_position(&mut state, &cfg, DT);
            let err = state.q.max_abs_diff(&state.q_setpoint);
            // never overshoots and never moves away
            prop_assert!(err <= prev + 1e-15);
            prev = err;
        }
        prop_assert!(state.q.max_abs_diff(&state.q_setpoint) <= 1e-4);
        for _ in 0..1000 {
            step_position(&mut state, &cfg, DT);
        }
        prop_assert_eq!(&state.q.0, &target);
    }

    #[test]
    fn joint_speed_never_exceeds_the_limit(target in arb_setpoint(RobotKind::Ur5)) {
        let cfg = PositionControllerConfig::default();
        let model = KinematicModel::builtin(RobotKind::Ur5);
        let mut state = RobotState::at_home(&model);
        state.q_setpoint = JointVector(target);
        for _ in 0..500 {
            let before = state.q.clone();
            step_position(&mut state, &cfg, DT);
            prop_assert!(state.q.max_abs_diff(&before) <= cfg.velocity_limit * DT + 1e-12);
        }
    }

    #[test]
    fn finger_force_is_bounded(width in 0.0f64..0.08, setpoint in 0.0f64..FINGER_MAX, ticks in 1usize..2000) {
        let cfg = EffortControllerConfig::default();
        let model = KinematicModel::builtin(RobotKind::Panda);
        let mut state = RobotState::at_home(&model);
        state.finger_setpoints = [setpoint; 2];
        let contacts = FingerContacts::centered(width, 1);
        for _ in 0..ticks {
            step_effort(&mut state, &cfg, &contacts, DT);
            for i in 0..2 {
                prop_assert!(state.finger_forces[i] >= 0.0 && state.finger_forces[i] <= cfg.max_force);
                prop_assert!(state.fingers[i] >= 0.0 && state.fingers[i] <= FINGER_MAX);
            }
        }
        if state.attached_object.is_some() {
            prop_assert!(state.finger_forces.iter().all(|f| *f >= cfg.hold_threshold));
        }
    }
}
