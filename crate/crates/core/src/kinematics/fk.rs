use std::ops::Range;

use nalgebra::{Isometry3, Matrix6xX, Translation3, UnitQuaternion, Vector3};

use super::{DhConvention, DhRow, KinematicModel, ModelError, Pose};

fn rot_x(angle: f64) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::identity(), UnitQuaternion::from_axis_angle(&Vector3::x_axis(), angle))
}

fn rot_z(angle: f64) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::identity(), UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle))
}

fn trans(x: f64, y: f64, z: f64) -> Isometry3<f64> {
    Isometry3::translation(x, y, z)
}

/// The part of a joint transform that precedes the joint rotation.
fn pre_joint(convention: DhConvention, row: &DhRow) -> Isometry3<f64> {
    match convention {
        DhConvention::Standard => Isometry3::identity(),
        DhConvention::Modified => rot_x(row.alpha) * trans(row.a, 0.0, 0.0),
    }
}

/// The part of a joint transform that follows the joint rotation.
fn post_joint(convention: DhConvention, row: &DhRow) -> Isometry3<f64> {
    match convention {
        DhConvention::Standard => trans(row.a, 0.0, row.d) * rot_x(row.alpha),
        DhConvention::Modified => trans(0.0, 0.0, row.d),
    }
}

fn joint_transform(convention: DhConvention, row: &DhRow, q: f64) -> Isometry3<f64> {
    pre_joint(convention, row) * rot_z(q + row.theta_offset) * post_joint(convention, row)
}

/// Product of the joint transforms in `joints` (no tool). Composing adjacent
/// segments gives the same result as evaluating the whole range.
pub fn chain_segment(model: &KinematicModel, q: &[f64], joints: Range<usize>) -> Result<Isometry3<f64>, ModelError> {
    model.check_dim(q)?;
    if joints.end > model.dof() || joints.start > joints.end {
        return Err(ModelError::Invalid(format!("joint range {joints:?} outside 0..{}", model.dof())));
    }
    let conv = model.convention();
    Ok(joints.fold(Isometry3::identity(), |acc, i| {
        acc * joint_transform(conv, &model.rows()[i], q[i])
    }))
}

/// Frames after each joint, followed by the tool frame. `dof + 1` entries.
pub fn link_frames(model: &KinematicModel, q: &[f64]) -> Result<Vec<Isometry3<f64>>, ModelError> {
    model.check_dim(q)?;
    let conv = model.convention();
    let mut frames = Vec::with_capacity(model.dof() + 1);
    let mut acc = Isometry3::identity();
    for (row, &qi) in model.rows().iter().zip(q) {
        acc *= joint_transform(conv, row, qi);
        frames.push(acc);
    }
    frames.push(acc * model.tool());
    Ok(frames)
}

pub fn tool_isometry(model: &KinematicModel, q: &[f64]) -> Result<Isometry3<f64>, ModelError> {
    Ok(chain_segment(model, q, 0..model.dof())? * model.tool())
}

pub fn forward_kinematics(model: &KinematicModel, q: &[f64]) -> Result<Pose, ModelError> {
    Ok(Pose::from_isometry(&tool_isometry(model, q)?))
}

/// Origin and unit axis of every joint in the base frame.
pub fn joint_axes(model: &KinematicModel, q: &[f64]) -> Result<Vec<(Vector3<f64>, Vector3<f64>)>, ModelError> {
    model.check_dim(q)?;
    let conv = model.convention();
    let mut acc = Isometry3::identity();
    let mut axes = Vec::with_capacity(model.dof());
    for (row, &qi) in model.rows().iter().zip(q) {
        let axis_frame = acc * pre_joint(conv, row);
        axes.push((axis_frame.translation.vector, axis_frame.rotation * Vector3::z()));
        acc = axis_frame * rot_z(qi + row.theta_offset) * post_joint(conv, row);
    }
    Ok(axes)
}

/// Geometric Jacobian in the base frame: linear velocity rows on top, angular below.
pub fn jacobian(model: &KinematicModel, q: &[f64]) -> Result<Matrix6xX<f64>, ModelError> {
    let axes = joint_axes(model, q)?;
    let tip = tool_isometry(model, q)?.translation.vector;
    let mut jac = Matrix6xX::zeros(model.dof());
    for (i, (origin, z)) in axes.iter().enumerate() {
        let linear = z.cross(&(tip - origin));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&linear);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(z);
    }
    Ok(jac)
}
