use nalgebra::{DVector, Matrix6, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{jacobian, tool_isometry, JointVector, KinematicModel, ModelError, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    /// Damping factor of the least-squares step.
    pub lambda: f64,
    pub max_iterations: usize,
    /// Metres.
    pub position_tolerance: f64,
    /// Radians.
    pub orientation_tolerance: f64,
    /// Largest change of any single joint per iteration, radians.
    pub max_step: f64,
    /// Extra attempts from pseudo-random in-limit seeds when the first descent stalls.
    pub restarts: usize,
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams {
            lambda: 0.05,
            max_iterations: 500,
            position_tolerance: 1e-4,
            orientation_tolerance: 1e-3,
            max_step: 0.2,
            restarts: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IkStatus {
    Converged,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkResult {
    pub q: JointVector,
    pub iterations: usize,
    /// Metres.
    pub position_residual: f64,
    /// Radians.
    pub orientation_residual: f64,
    pub status: IkStatus,
}

impl IkResult {
    pub fn converged(&self) -> bool {
        self.status == IkStatus::Converged
    }

    /// Combined residual norm, metres and radians mixed.
    pub fn residual(&self) -> f64 {
        self.position_residual.hypot(self.orientation_residual)
    }
}

/// Twist that moves `current` onto `target`: position difference on top,
/// rotation vector of `target * current^-1` below, both in the base frame.
pub fn pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dr = (target.orientation * current.orientation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Damped least squares: `dq = J^T (J J^T + lambda^2 I)^-1 e`, projected back into
/// the joint limits after every step. A descent that stops making progress is
/// retried from up to `params.restarts` pseudo-random in-limit seeds; the sequence of
/// seeds is fixed, so results are deterministic.
pub fn inverse_kinematics(
    model: &KinematicModel,
    target: &Pose,
    seed: &JointVector,
    params: &IkParams,
) -> Result<IkResult, ModelError> {
    model.check_dim(seed)?;
    if !target.position.iter().all(|v| v.is_finite()) || !target.orientation.coords.iter().all(|v| v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1c0ffee);
    let mut start = model.clamped(seed);
    let mut total_iterations = 0;
    let mut best: Option<IkResult> = None;
    for attempt in 0..=params.restarts {
        if attempt > 0 {
            start = model
                .limits()
                .iter()
                .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
                .collect::<Vec<_>>()
                .into();
        }
        let mut result = descend(model, target, start.clone(), params, attempt == params.restarts)?;
        total_iterations += result.iterations;
        result.iterations = total_iterations;
        if result.converged() {
            return Ok(result);
        }
        if best.as_ref().is_none_or(|b| result.residual() < b.residual()) {
            best = Some(result);
        }
    }
    let mut best = best.expect("at least one attempt");
    best.iterations = total_iterations;
    Ok(best)
}

/// Iterations without a 1 % improvement after which a descent counts as stalled.
const STALL_WINDOW: usize = 60;

fn descend(
    model: &KinematicModel,
    target: &Pose,
    mut q: JointVector,
    params: &IkParams,
    last_attempt: bool,
) -> Result<IkResult, ModelError> {
    let damping = Matrix6::identity() * params.lambda * params.lambda;
    let mut best_err = f64::INFINITY;
    let mut best_at = 0;
    let mut iterations = 0;
    loop {
        let current = Pose::from_isometry(&tool_isometry(model, &q)?);
        let err = pose_error(&current, target);
        let pos_res = err.fixed_rows::<3>(0).norm();
        let rot_res = err.fixed_rows::<3>(3).norm();
        let done = pos_res <= params.position_tolerance && rot_res <= params.orientation_tolerance;
        let total = err.norm();
        if total < 0.99 * best_err {
            best_err = total;
            best_at = iterations;
        }
        let stalled = !last_attempt && iterations - best_at > STALL_WINDOW;
        if done || stalled || iterations >= params.max_iterations {
            return Ok(IkResult {
                q,
                iterations,
                position_residual: pos_res,
                orientation_residual: rot_res,
                status: if done { IkStatus::Converged } else { IkStatus::Unreachable },
            });
        }
        let jac = jacobian(model, &q)?;
        let jjt = &jac * jac.transpose() + damping;
        let Some(chol) = jjt.cholesky() else {
            return Err(ModelError::Invalid("singular damped system".into()));
        };
        let mut dq: DVector<f64> = jac.transpose() * chol.solve(&err);
        let biggest = dq.amax();
        if biggest > params.max_step {
            dq *= params.max_step / biggest;
        }
        for (qi, d) in q.iter_mut().zip(dq.iter()) {
            *qi += d;
        }
        model.project(&mut q);
        iterations += 1;
    }
}

/// Total joint travel between two configurations, radians.
pub fn solution_complexity(seed: &[f64], solution: &[f64]) -> Result<f64, ModelError> {
    if seed.len() != solution.len() {
        return Err(ModelError::DimensionMismatch {
            expected: seed.len(),
            got: solution.len(),
        });
    }
    Ok(seed.iter().zip(solution).map(|(a, b)| (a - b).abs()).sum())
}
