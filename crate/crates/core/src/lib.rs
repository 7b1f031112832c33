//! Core of the multi-robot teleoperation bridge.
//!
//! The crate is split along the data path of a command:
//!
//! * [`wire`] encodes operator input into tagged 16-bit frames and parses them back,
//! * [`session`] gates and dispatches decoded frames per connection,
//! * [`kinematics`] and [`control`] turn setpoints into joint motion,
//! * [`world`] owns both simulated arms, the table scene, perception and the
//!   autonomous pick-and-place sequence,
//! * [`metrics`], [`replay`] and [`report`] produce the accuracy, latency and
//!   grasp-success numbers.
//!
//! Everything here is synchronous and deterministic; the async bridge lives in
//! the `teleop-service` crate.

use serde::{Deserialize, Serialize};

pub mod accuracy;
pub mod api;
pub mod bench;
pub mod control;
pub mod kinematics;
pub mod metrics;
pub mod replay;
pub mod report;
pub mod scenario;
pub mod session;
pub mod wire;
pub mod world;

/// The two manipulators the bridge can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobotKind {
    Ur5,
    Panda,
}

impl RobotKind {
    pub const ALL: [RobotKind; 2] = [RobotKind::Ur5, RobotKind::Panda];

    pub fn index(self) -> usize {
        match self {
            RobotKind::Ur5 => 0,
            RobotKind::Panda => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RobotKind::Ur5 => "ur5",
            RobotKind::Panda => "panda",
        }
    }
}

impl std::fmt::Display for RobotKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RobotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ur5" => Ok(RobotKind::Ur5),
            "panda" => Ok(RobotKind::Panda),
            other => Err(format!("unknown robot '{other}'")),
        }
    }
}
