//! Per-connection state: which robot and mode the operator picked, the pending
//! pose for Mode 2, and the dispatch from decoded frames to world commands.

use serde::{Deserialize, Serialize};

use crate::kinematics::{inverse_kinematics, IkParams, Pose};
use crate::wire::{decode_angle, decode_gripper, decode_scaled, Mode, ScaleConfig, Tag, WireFrame};
use crate::world::{Command, World};
use crate::RobotKind;

/// Values carried by 9003 replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NoRobot = 1,
    NoMode = 2,
    WrongMode = 3,
    IncompletePose = 4,
    Unreachable = 5,
    BadValue = 6,
    NoSuchJoint = 7,
    Clamped = 8,
    Malformed = 9,
    Unsupported = 10,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 10] = [
        ErrorCode::NoRobot,
        ErrorCode::NoMode,
        ErrorCode::WrongMode,
        ErrorCode::IncompletePose,
        ErrorCode::Unreachable,
        ErrorCode::BadValue,
        ErrorCode::NoSuchJoint,
        ErrorCode::Clamped,
        ErrorCode::Malformed,
        ErrorCode::Unsupported,
    ];

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<ErrorCode> {
        ErrorCode::ALL.into_iter().find(|e| e.code() == code)
    }

    pub fn describe(self) -> &'static str {
        match self {
            ErrorCode::NoRobot => "no robot selected",
            ErrorCode::NoMode => "no mode selected",
            ErrorCode::WrongMode => "frame not valid in the active mode",
            ErrorCode::IncompletePose => "confirm before all seven pose components were sent",
            ErrorCode::Unreachable => "pose is out of reach",
            ErrorCode::BadValue => "value decodes but is not usable",
            ErrorCode::NoSuchJoint => "selected robot has no such joint",
            ErrorCode::Clamped => "setpoint was clamped to the joint limits",
            ErrorCode::Malformed => "value is not a valid encoding for the tag",
            ErrorCode::Unsupported => "tag is sent by the bridge, not to it",
        }
    }

    pub fn reply(self) -> WireFrame {
        WireFrame::new(Tag::Error, self.code())
    }
}

/// What an operator asked for, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// 0-based joint, radians.
    Joint { joint: usize, value: f64 },
    /// 0-based finger, metres.
    Finger { finger: usize, value: f64 },
    /// Tool pose in the base frame.
    Pose { pose: Pose },
    Start,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commanded {
    pub robot: RobotKind,
    pub mode: Mode,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    /// Queue for the world at the next tick boundary.
    Command(Command),
    /// Send back to this connection.
    Reply(WireFrame),
    /// Record for the accuracy log.
    Commanded(Commanded),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: u64,
    pub robot: Option<RobotKind>,
    pub mode: Option<Mode>,
    pub pose_buffer: [Option<f64>; 7],
    /// Time of the last frame, s, on whatever clock the owner uses.
    pub last_activity: f64,
    pub scale: ScaleConfig,
}

impl Session {
    pub fn new(id: u64, scale: ScaleConfig) -> Session {
        Session {
            id,
            robot: None,
            mode: None,
            pose_buffer: [None; 7],
            last_activity: 0.0,
            scale,
        }
    }

    pub fn pose_complete(&self) -> bool {
        self.pose_buffer.iter().all(Option::is_some)
    }

    /// Dispatches one frame. `world` is read for the current joint state (IK seed)
    /// and the robot models; it is not modified.
    pub fn handle_frame(&mut self, frame: &WireFrame, world: &World, ik: &IkParams, now: f64) -> Vec<Effect> {
        self.last_activity = now;
        let error = |code: ErrorCode| vec![Effect::Reply(code.reply())];
        match frame.tag {
            Tag::Echo => return vec![Effect::Reply(*frame)],
            Tag::Robot(kind) => {
                if world.arm(kind).is_none() {
                    return error(ErrorCode::BadValue);
                }
                self.robot = Some(kind);
                self.pose_buffer = [None; 7];
                return vec![];
            }
            Tag::Mode(mode) => {
                self.mode = Some(mode);
                self.pose_buffer = [None; 7];
                return vec![];
            }
            Tag::Status | Tag::RealTimeFactor | Tag::Error => return error(ErrorCode::Unsupported),
            _ => {}
        }

        let Some(robot) = self.robot else {
            return error(ErrorCode::NoRobot);
        };
        let Some(mode) = self.mode else {
            return error(ErrorCode::NoMode);
        };
        let arm = world.arm(robot).expect("selection checked against the world");
        let commanded = |target: Target| Effect::Commanded(Commanded { robot, mode, target });

        match frame.tag {
            Tag::Joint(n) => {
                if !matches!(mode, Mode::Joints | Mode::Tilt) {
                    return error(ErrorCode::WrongMode);
                }
                let joint = usize::from(n) - 1;
                if joint >= arm.model.dof() {
                    return error(ErrorCode::NoSuchJoint);
                }
                let Ok(deg) = decode_angle(frame.value) else {
                    return error(ErrorCode::Malformed);
                };
                let value = f64::from(deg).to_radians();
                vec![
                    Effect::Command(Command::SetJoint { robot, joint, value }),
                    commanded(Target::Joint { joint, value }),
                ]
            }
            Tag::Finger(f) => {
                let Ok(value) = decode_gripper(frame.value) else {
                    return error(ErrorCode::Malformed);
                };
                let finger = f.index();
                vec![
                    Effect::Command(Command::SetFinger { robot, finger, value }),
                    commanded(Target::Finger { finger, value }),
                ]
            }
            Tag::Pose(c) => {
                if mode != Mode::Pose {
                    return error(ErrorCode::WrongMode);
                }
                let Ok(v) = decode_scaled(frame.value, self.scale) else {
                    return error(ErrorCode::Malformed);
                };
                self.pose_buffer[c.index()] = Some(v);
                vec![]
            }
            Tag::Confirm => {
                if mode != Mode::Pose {
                    return error(ErrorCode::WrongMode);
                }
                let Some(c) = self.pose_buffer.iter().copied().collect::<Option<Vec<f64>>>() else {
                    return error(ErrorCode::IncompletePose);
                };
                let Ok(pose) = Pose::from_components([c[0], c[1], c[2], c[3], c[4], c[5], c[6]]) else {
                    return error(ErrorCode::BadValue);
                };
                match inverse_kinematics(&arm.model, &pose, &arm.state.q, ik) {
                    Ok(sol) if sol.converged() => vec![
                        Effect::Command(Command::SetJoints { robot, q: sol.q }),
                        commanded(Target::Pose { pose }),
                    ],
                    Ok(_) => error(ErrorCode::Unreachable),
                    Err(_) => error(ErrorCode::BadValue),
                }
            }
            Tag::Start | Tag::Stop => {
                if mode != Mode::Autonomous {
                    return error(ErrorCode::WrongMode);
                }
                if frame.tag == Tag::Start {
                    vec![Effect::Command(Command::GraspStart { robot }), commanded(Target::Start)]
                } else {
                    vec![Effect::Command(Command::GraspStop { robot }), commanded(Target::Stop)]
                }
            }
            Tag::Echo | Tag::Robot(_) | Tag::Mode(_) | Tag::Status | Tag::RealTimeFactor | Tag::Error => {
                unreachable!("handled before the gate")
            }
        }
    }
}
