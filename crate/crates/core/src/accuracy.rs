//! Commanded-versus-achieved sweeps. Joint and tilt modes are generated as replay
//! scripts; pose mode sends seeded reachable targets through a session and compares
//! the settled tool position with the target before wire quantization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{forward_kinematics, JointVector, KinematicModel};
use crate::metrics::{accuracy_report, Accuracy, MetricsError};
use crate::replay::{run_replay, ModeAccuracy, ReplayError, Sample, ScriptLine};
use crate::scenario::Scenario;
use crate::session::{Effect, Session};
use crate::wire::{encode_angle, encode_scaled, Mode, PoseComponent, ScaleConfig, Tag, WireFrame};
use crate::world::{CommandOutcome, World, WorldError};
use crate::RobotKind;

/// Wait before each set of joint setpoints, long enough for a full-range move.
pub const SET_DELAY_MS: u64 = 3000;
/// Simulated seconds a pose target may take to settle.
pub const POSE_SETTLE_LIMIT: f64 = 10.0;

#[derive(Debug, Error)]
pub enum AccuracyError {
    #[error("samples and repetitions must both be at least 1")]
    Empty,
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBenchConfig {
    /// Distinct setpoint sets per robot and mode.
    pub samples: u32,
    /// Times each set is commanded.
    pub repetitions: u32,
    pub seed: u64,
    pub scale: ScaleConfig,
}

impl Default for AccuracyBenchConfig {
    fn default() -> Self {
        AccuracyBenchConfig {
            samples: 20,
            repetitions: 2,
            seed: 7,
            scale: ScaleConfig::CENTI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub robot: RobotKind,
    /// Target position before encoding, base frame, metres.
    pub intended: [f64; 3],
    pub achieved: [f64; 3],
    /// Euclidean distance, metres.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBenchReport {
    pub config: AccuracyBenchConfig,
    /// Joint-space accuracy of the joint and tilt sweeps, radians.
    pub joint_modes: Vec<ModeAccuracy>,
    /// Per-axis position accuracy of pose mode, metres.
    pub pose: Option<Accuracy>,
    pub pose_max_error: f64,
    /// Quantized targets the solver could not reach; not scored.
    pub pose_unreachable: u32,
    pub joint_samples: Vec<Sample>,
    pub pose_samples: Vec<PoseSample>,
}

/// Whole-degree setpoint range of each joint, one degree inside the limits.
fn degree_ranges(model: &KinematicModel) -> Vec<(i32, i32)> {
    model
        .limits()
        .iter()
        .map(|(lo, hi)| {
            let lo = (lo.to_degrees().ceil() as i32 + 1).max(-180);
            let hi = (hi.to_degrees().floor() as i32 - 1).min(180);
            (lo, hi)
        })
        .collect()
}

/// Selects each robot in turn, enters `mode`, then commands `samples` random sets of
/// whole-degree joint angles, each set `repetitions` times.
pub fn joint_sweep_script(mode: Mode, samples: u32, repetitions: u32, rng: &mut impl Rng) -> Vec<ScriptLine> {
    let mut frames: Vec<(u64, WireFrame)> = vec![];
    for robot in RobotKind::ALL {
        let model = KinematicModel::builtin(robot);
        let ranges = degree_ranges(&model);
        let sets: Vec<Vec<i32>> = (0..samples)
            .map(|_| ranges.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect())
            .collect();
        frames.push((0, WireFrame::signal(Tag::Robot(robot))));
        frames.push((0, WireFrame::signal(Tag::Mode(mode))));
        for _ in 0..repetitions {
            for set in &sets {
                for (j, deg) in set.iter().enumerate() {
                    let delay = if j == 0 { SET_DELAY_MS } else { 0 };
                    let value = encode_angle(*deg).expect("range is within the codec");
                    frames.push((delay, WireFrame::new(Tag::Joint(j as u8 + 1), value)));
                }
            }
        }
    }
    frames
        .into_iter()
        .enumerate()
        .map(|(i, (delay_ms, frame))| ScriptLine {
            line: i + 1,
            delay_ms,
            frame,
        })
        .collect()
}

/// Renders a script in the text format read by [`crate::replay::parse_script`].
pub fn script_to_text(script: &[ScriptLine]) -> String {
    script
        .iter()
        .map(|l| format!("{} {}\n", l.delay_ms, l.frame))
        .collect()
}

fn pose_sweep(
    scenario: &Scenario,
    config: &AccuracyBenchConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<PoseSample>, u32), AccuracyError> {
    let mut world = World::new(scenario.world.clone())?;
    let mut session = Session::new(0, config.scale);
    let ik = scenario.world.ik;
    let dt = scenario.dt;
    let mut samples = vec![];
    let mut unreachable = 0;
    for robot in RobotKind::ALL {
        let model = KinematicModel::builtin(robot);
        let targets: Vec<[f64; 7]> = (0..config.samples)
            .map(|_| {
                let q: JointVector = model
                    .limits()
                    .iter()
                    .map(|(lo, hi)| {
                        let margin = 0.1 * (hi - lo);
                        rng.gen_range(lo + margin..=hi - margin)
                    })
                    .collect::<Vec<_>>()
                    .into();
                forward_kinematics(&model, &q).expect("model dimension").components()
            })
            .collect();
        let send = |world: &mut World, session: &mut Session, frame: WireFrame| -> bool {
            let mut applied = false;
            for effect in session.handle_frame(&frame, world, &ik, world.time()) {
                if let Effect::Command(cmd) = effect {
                    applied |= matches!(world.apply(&cmd), CommandOutcome::Applied | CommandOutcome::Clamped);
                }
            }
            applied
        };
        send(&mut world, &mut session, WireFrame::signal(Tag::Robot(robot)));
        send(&mut world, &mut session, WireFrame::signal(Tag::Mode(Mode::Pose)));
        for _ in 0..config.repetitions {
            for target in &targets {
                for c in PoseComponent::ALL {
                    let value = encode_scaled(target[c.index()], config.scale).expect("tool positions are within 10 m");
                    send(&mut world, &mut session, WireFrame::new(Tag::Pose(c), value));
                }
                if !send(&mut world, &mut session, WireFrame::signal(Tag::Confirm)) {
                    unreachable += 1;
                    continue;
                }
                let limit = (POSE_SETTLE_LIMIT / dt).ceil() as u64;
                for _ in 0..limit {
                    let arm = world.arm(robot).expect("mounted");
                    if arm.state.settled(&scenario.world.position) {
                        break;
                    }
                    world.step(dt);
                }
                let arm = world.arm(robot).expect("mounted");
                let achieved = forward_kinematics(&arm.model, &arm.state.q).expect("state matches model").position;
                let intended = [target[0], target[1], target[2]];
                let achieved = [achieved.x, achieved.y, achieved.z];
                let error = intended
                    .iter()
                    .zip(&achieved)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                samples.push(PoseSample {
                    robot,
                    intended,
                    achieved,
                    error,
                });
            }
        }
    }
    Ok((samples, unreachable))
}

pub fn run_accuracy_bench(scenario: &Scenario, config: &AccuracyBenchConfig) -> Result<AccuracyBenchReport, AccuracyError> {
    if config.samples == 0 || config.repetitions == 0 {
        return Err(AccuracyError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut joint_samples = vec![];
    let mut joint_modes = vec![];
    for mode in [Mode::Joints, Mode::Tilt] {
        let script = joint_sweep_script(mode, config.samples, config.repetitions, &mut rng);
        let report = run_replay(scenario, &script, config.scale)?;
        joint_modes.extend(report.accuracy);
        joint_samples.extend(report.samples);
    }
    let (pose_samples, pose_unreachable) = pose_sweep(scenario, config, &mut rng)?;
    let pairs: Vec<(f64, f64)> = pose_samples
        .iter()
        .flat_map(|s| s.intended.into_iter().zip(s.achieved))
        .collect();
    let pose = accuracy_report(&pairs).ok();
    let pose_max_error = pose_samples.iter().map(|s| s.error).fold(0.0, f64::max);
    Ok(AccuracyBenchReport {
        config: *config,
        joint_modes,
        pose,
        pose_max_error,
        pose_unreachable,
        joint_samples,
        pose_samples,
    })
}
