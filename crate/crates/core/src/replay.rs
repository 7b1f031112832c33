//! Scripted sessions. A script is the wire's own line format with a leading
//! column of milliseconds to wait before the frame:
//!
//! ```text
//! # select the Panda, joint mode, then move joint 3
//! 0    5001 1
//! 0    4001 1
//! 1500 3003 1090
//! ```
//!
//! Replay runs an in-process world at the scenario tick, so results are
//! reproducible bit for bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::forward_kinematics;
use crate::metrics::{accuracy_report, Accuracy};
use crate::scenario::Scenario;
use crate::session::{Commanded, Effect, ErrorCode, Session, Target};
use crate::wire::{Mode, ScaleConfig, WireFrame};
use crate::world::{CommandOutcome, World, WorldError};
use crate::RobotKind;

/// Simulated seconds allowed for everything to come to rest after the last frame.
pub const FINAL_SETTLE_LIMIT: f64 = 30.0;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptLine {
    pub line: usize,
    pub delay_ms: u64,
    pub frame: WireFrame,
}

pub fn parse_script(src: &str) -> Result<Vec<ScriptLine>, ReplayError> {
    let mut out = vec![];
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let err = |message: String| ReplayError::Parse { line, message };
        let mut parts = text.splitn(2, char::is_whitespace);
        let delay = parts.next().unwrap_or("");
        let delay_ms: u64 = delay.parse().map_err(|_| err(format!("bad delay '{delay}'")))?;
        let rest = parts.next().unwrap_or("").trim();
        let fields: Vec<&str> = rest.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(err(format!("expected '<delay_ms> <tag> <value>', got '{text}'")));
        }
        let frame = WireFrame::parse_line(&format!("{} {}", fields[0], fields[1])).map_err(|e| err(e.to_string()))?;
        out.push(ScriptLine { line, delay_ms, frame });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// Simulated time, s.
    pub time: f64,
    pub direction: Direction,
    pub tag: u16,
    pub value: u16,
}

/// What a commanded value is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Radians.
    Joint(usize),
    /// Metres.
    Finger(usize),
    /// Tool position component in the base frame, metres.
    Position(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub robot: RobotKind,
    pub mode: Mode,
    pub quantity: Quantity,
    pub commanded: f64,
    pub achieved: f64,
    /// The world clamped the setpoint; such samples are not scored.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAccuracy {
    pub mode: Mode,
    /// `rad` for joint angles, `m` for gripper and pose positions.
    pub unit: String,
    pub accuracy: Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub frames: usize,
    pub sim_time: f64,
    pub transcript: Vec<TranscriptEntry>,
    pub samples: Vec<Sample>,
    pub accuracy: Vec<ModeAccuracy>,
}

struct Open {
    commanded: Commanded,
    clamped: bool,
}

fn key(c: &Commanded) -> Option<(RobotKind, u8, usize)> {
    match c.target {
        Target::Joint { joint, .. } => Some((c.robot, 0, joint)),
        Target::Finger { finger, .. } => Some((c.robot, 1, finger)),
        Target::Pose { .. } => Some((c.robot, 2, 0)),
        Target::Start | Target::Stop => None,
    }
}

fn close(open: Open, world: &World, out: &mut Vec<Sample>) {
    let c = open.commanded;
    let arm = world.arm(c.robot).expect("commanded robots are mounted");
    let mut push = |quantity, commanded, achieved| {
        out.push(Sample {
            robot: c.robot,
            mode: c.mode,
            quantity,
            commanded,
            achieved,
            clamped: open.clamped,
        })
    };
    match &c.target {
        Target::Joint { joint, value } => push(Quantity::Joint(*joint), *value, arm.state.q[*joint]),
        Target::Finger { finger, value } => push(Quantity::Finger(*finger), *value, arm.state.fingers[*finger]),
        Target::Pose { pose } => {
            let achieved = forward_kinematics(&arm.model, &arm.state.q).expect("state matches model");
            for i in 0..3 {
                push(Quantity::Position(i), pose.position[i], achieved.position[i]);
            }
        }
        Target::Start | Target::Stop => {}
    }
}

fn all_at_rest(world: &World) -> bool {
    world.arms().iter().all(|a| {
        a.state.settled(&world.config().position)
            && a.state.fingers.iter().zip(&a.state.finger_setpoints).all(|(f, s)| (f - s).abs() < 1e-9 || a.state.finger_forces.iter().any(|x| *x > 0.0))
    })
}

/// Plays `script` against a fresh world built from `scenario`.
pub fn run_replay(scenario: &Scenario, script: &[ScriptLine], scale: ScaleConfig) -> Result<ReplayReport, ReplayError> {
    let mut world = World::new(scenario.world.clone())?;
    let mut session = Session::new(0, scale);
    let mut transcript = vec![];
    let mut samples = vec![];
    let mut open: Vec<Open> = vec![];
    let dt = scenario.dt;

    for line in script {
        let steps = (line.delay_ms as f64 / 1000.0 / dt).round() as u64;
        for _ in 0..steps {
            world.step(dt);
        }
        let now = world.time();
        transcript.push(TranscriptEntry {
            time: now,
            direction: Direction::In,
            tag: line.frame.tag.code(),
            value: line.frame.value,
        });
        let effects = session.handle_frame(&line.frame, &world, &scenario.world.ik, now);
        let mut clamped = false;
        for effect in effects {
            match effect {
                Effect::Command(cmd) => match world.apply(&cmd) {
                    CommandOutcome::Clamped => {
                        clamped = true;
                        let reply = ErrorCode::Clamped.reply();
                        transcript.push(TranscriptEntry {
                            time: now,
                            direction: Direction::Out,
                            tag: reply.tag.code(),
                            value: reply.value,
                        });
                    }
                    CommandOutcome::Rejected(_) => {
                        let reply = ErrorCode::BadValue.reply();
                        transcript.push(TranscriptEntry {
                            time: now,
                            direction: Direction::Out,
                            tag: reply.tag.code(),
                            value: reply.value,
                        });
                    }
                    CommandOutcome::Applied | CommandOutcome::Ignored => {}
                },
                Effect::Reply(frame) => transcript.push(TranscriptEntry {
                    time: now,
                    direction: Direction::Out,
                    tag: frame.tag.code(),
                    value: frame.value,
                }),
                Effect::Commanded(c) => {
                    let Some(k) = key(&c) else { continue };
                    if let Some(pos) = open.iter().position(|o| key(&o.commanded) == Some(k)) {
                        close(open.remove(pos), &world, &mut samples);
                    }
                    open.push(Open { commanded: c, clamped });
                }
            }
        }
    }

    if !script.is_empty() {
        let limit = (FINAL_SETTLE_LIMIT / dt).ceil() as u64;
        for _ in 0..limit {
            if all_at_rest(&world) {
                break;
            }
            world.step(dt);
        }
    }
    for o in open.drain(..) {
        close(o, &world, &mut samples);
    }

    let accuracy = summarize(&samples);
    Ok(ReplayReport {
        frames: script.len(),
        sim_time: world.time(),
        transcript,
        samples,
        accuracy,
    })
}

/// Accuracy per mode over the unclamped samples; modes with fewer than two are left out.
pub fn summarize(samples: &[Sample]) -> Vec<ModeAccuracy> {
    let mut out = vec![];
    for mode in Mode::ALL {
        for (unit, angular) in [("rad", true), ("m", false)] {
            let pairs: Vec<(f64, f64)> = samples
                .iter()
                .filter(|s| s.mode == mode && !s.clamped)
                .filter(|s| matches!(s.quantity, Quantity::Joint(_)) == angular)
                .map(|s| (s.commanded, s.achieved))
                .collect();
            if let Ok(accuracy) = accuracy_report(&pairs) {
                out.push(ModeAccuracy {
                    mode,
                    unit: unit.into(),
                    accuracy,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let s = parse_script("# header\n\n0 5001 1   # panda\n250 4001 1\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].line, 4);
        assert_eq!(s[1].delay_ms, 250);
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = parse_script("0 5001 1\n0 5001\n").unwrap_err();
        assert!(matches!(err, ReplayError::Parse { line: 2, .. }), "{err}");
        let err = parse_script("0 5001 1\n\nx 5001 1\n").unwrap_err();
        assert!(matches!(err, ReplayError::Parse { line: 3, .. }));
        let err = parse_script("0 1234 1\n").unwrap_err();
        assert!(matches!(err, ReplayError::Parse { line: 1, .. }));
    }

    #[test]
    fn empty_script_empty_transcript() {
        let r = run_replay(&Scenario::default(), &[], ScaleConfig::CENTI).unwrap();
        assert!(r.transcript.is_empty());
        assert!(r.samples.is_empty());
        assert_eq!(r.sim_time, 0.0);
    }

    #[test]
    fn joint_command_settles() {
        let script = parse_script("0 5001 1\n0 4001 1\n0 3003 1090\n0 3001 30\n").unwrap();
        let r = run_replay(&Scenario::default(), &script, ScaleConfig::CENTI).unwrap();
        assert_eq!(r.samples.len(), 2);
        for s in &r.samples {
            assert!((s.commanded - s.achieved).abs() <= 1e-4, "{s:?}");
        }
        assert_eq!(r.accuracy.len(), 1);
        assert_eq!(r.accuracy[0].mode, Mode::Joints);
    }

    #[test]
    fn clamped_command_is_flagged() {
        // Panda joint 4 stays below -0.07 rad; 90 degrees is out of range
        let script = parse_script("0 5001 1\n0 4001 1\n0 3004 90\n").unwrap();
        let r = run_replay(&Scenario::default(), &script, ScaleConfig::CENTI).unwrap();
        assert!(r.samples[0].clamped);
        assert!(r.transcript.iter().any(|t| t.direction == Direction::Out && t.tag == 9003 && t.value == 8));
    }
}
