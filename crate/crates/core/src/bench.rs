//! Seeded pick-and-place trials. Each trial puts one randomly sized and placed
//! object on the table, presses Start for one arm and runs the world until the
//! sequence ends.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Scenario, TrialSampling};
use crate::world::{Command, FailureReason, Phase, Scene, SceneObject, Shape, World, WorldError};
use crate::RobotKind;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("at least one trial is required")]
    NoTrials,
    #[error("no valid object placement found for {0}")]
    Sampling(RobotKind),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u32,
    pub seed: u64,
    pub robot: RobotKind,
    pub object: SceneObject,
    pub phase: Phase,
    pub failure: Option<FailureReason>,
    /// Status flag bits at the end of the trial.
    pub flags: u16,
    /// Largest carried-segment joint travel of the plan, degrees.
    pub carried_travel_deg: Option<f64>,
    pub sim_time: f64,
}

impl TrialRow {
    pub fn succeeded(&self) -> bool {
        self.phase == Phase::Done
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspBenchReport {
    pub seed: u64,
    pub trials: u32,
    pub theta_drop_deg: f64,
    pub successes: u32,
    /// Trials ended by Stop; excluded from the success fraction.
    pub stopped: u32,
    pub success_fraction: f64,
    pub rows: Vec<TrialRow>,
}

/// Draws a trial object resting on the table within reach of `robot`.
pub fn sample_object(scene: &Scene, sampling: &TrialSampling, robot: RobotKind, rng: &mut impl Rng) -> Option<SceneObject> {
    let mount = scene.mount(robot)?;
    let table = &scene.table;
    let m = sampling.edge_margin;
    let half = sampling.bearing_half_angle_deg.to_radians();
    for _ in 0..1000 {
        let r = rng
            .gen_range(sampling.radius_min.powi(2)..sampling.radius_max.powi(2))
            .sqrt();
        let bearing = rng.gen_range(-half..=half);
        let x = mount.base[0] + r * bearing.cos();
        let y = mount.base[1] + r * bearing.sin();
        let shape = if rng.gen_bool(sampling.cylinder_fraction) {
            Shape::Cylinder {
                radius: rng.gen_range(0.015..0.025),
                height: rng.gen_range(0.05..0.10),
            }
        } else {
            Shape::Box {
                size: [rng.gen_range(0.03..0.06), rng.gen_range(0.02..0.05), rng.gen_range(0.04..0.08)],
            }
        };
        let yaw = rng.gen_range(-PI..PI);
        let on_table = x >= table.min[0] + m && x <= table.max[0] - m && y >= table.min[1] + m && y <= table.max[1] - m;
        let clear_of_zones = scene.robots.iter().all(|r| {
            let dz = &r.drop_zone;
            (x - dz.center[0]).abs() > dz.half_extents[0] + 0.05 || (y - dz.center[1]).abs() > dz.half_extents[1] + 0.05
        });
        if on_table && clear_of_zones {
            let top = table.top();
            return Some(SceneObject {
                id: 1,
                position: Vector3::new(x, y, top + shape.height() / 2.0),
                shape,
                yaw,
                support: Some(top),
            });
        }
    }
    None
}

/// One random object per mounted arm, ids counting from 1.
pub fn seeded_objects(scenario: &Scenario, seed: u64) -> Option<Vec<SceneObject>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = &scenario.world.scene;
    let mut out = vec![];
    for (i, mount) in scene.robots.iter().enumerate() {
        let mut obj = sample_object(scene, &scenario.trials, mount.kind, &mut rng)?;
        obj.id = i as u32 + 1;
        out.push(obj);
    }
    Some(out)
}

/// Runs one trial from its own seed.
pub fn run_trial(scenario: &Scenario, trial: u32, seed: u64) -> Result<TrialRow, BenchError> {
    let robot = RobotKind::ALL[trial as usize % RobotKind::ALL.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = scenario.world.clone();
    let object = sample_object(&config.scene, &scenario.trials, robot, &mut rng).ok_or(BenchError::Sampling(robot))?;
    config.scene.objects = vec![object.clone()];
    let mut world = World::new(config)?;
    world.apply(&Command::GraspStart { robot });
    let steps = (scenario.trials.time_limit / scenario.dt).ceil() as u64;
    let mut carried = None;
    for _ in 0..steps {
        world.step(scenario.dt);
        let arm = world.arm(robot).expect("mounted");
        if carried.is_none() {
            carried = arm.plan.as_ref().map(|p| p.carried_travel().to_degrees());
        }
        if arm.sequence.phase.is_terminal() {
            break;
        }
    }
    let arm = world.arm(robot).expect("mounted");
    Ok(TrialRow {
        trial,
        seed,
        robot,
        object,
        phase: arm.sequence.phase,
        failure: arm.sequence.failure,
        flags: arm.sequence.flags.bits(),
        carried_travel_deg: carried,
        sim_time: world.time(),
    })
}

/// `n` trials whose seeds are drawn from `seed`.
pub fn run_grasp_bench(scenario: &Scenario, n: u32, seed: u64) -> Result<GraspBenchReport, BenchError> {
    if n == 0 {
        return Err(BenchError::NoTrials);
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n as usize);
    for trial in 0..n {
        let trial_seed: u64 = master.gen();
        rows.push(run_trial(scenario, trial, trial_seed)?);
    }
    let successes = rows.iter().filter(|r| r.succeeded()).count() as u32;
    let stopped = rows.iter().filter(|r| r.phase == Phase::Stopped).count() as u32;
    let counted = n - stopped;
    Ok(GraspBenchReport {
        seed,
        trials: n,
        theta_drop_deg: scenario.world.grasp.theta_drop_deg,
        successes,
        stopped,
        success_fraction: if counted == 0 { 0.0 } else { successes as f64 / counted as f64 },
        rows,
    })
}
