//! Forward kinematics, geometric Jacobians and damped-least-squares inverse
//! kinematics for the UR5 and Panda arms.
//!
//! Models are loaded from the TOML tables in `models/` (one Denavit-Hartenberg
//! row per joint, joint limits, tool offset, home configuration) and are
//! immutable afterwards, so every function here is pure.

mod fk;
mod ik;
mod model;
mod pose;

pub use fk::{chain_segment, forward_kinematics, jacobian, joint_axes, link_frames, tool_isometry};
pub use ik::{inverse_kinematics, pose_error, solution_complexity, IkParams, IkResult, IkStatus};
pub use model::{DhConvention, DhRow, KinematicModel, ModelError};
pub use pose::{JointVector, Pose};
