//! Damped least-squares inverse kinematics with per-iteration joint clamping.

use nalgebra::{Matrix6, Rotation3, SMatrix, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chain::{chain_poses, ChainPoses, HandPose};
use super::model::{ArmModel, BodyModel, JointConfig, JOINT_COUNT};
use crate::motion::{MotionState, Side};

type Jacobian = SMatrix<f64, 6, JOINT_COUNT>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkConfig {
    /// Levenberg damping factor.
    pub damping: f64,
    pub max_iterations: usize,
    /// Meters.
    pub position_tolerance: f64,
    /// Radians, geodesic.
    pub orientation_tolerance: f64,
    /// Per-iteration cap on the position error fed to the update, meters.
    pub max_position_step: f64,
    /// Per-iteration cap on the orientation error fed to the update, radians.
    pub max_orientation_step: f64,
    /// Extra seeds drawn uniformly within the joint limits from a fixed RNG
    /// seed, tried after the fallback seeds.
    pub restarts: usize,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_iterations: 200,
            position_tolerance: 1e-3,
            orientation_tolerance: 1e-2,
            max_position_step: 0.1,
            max_orientation_step: 0.5,
            restarts: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub q: JointConfig,
    pub position_error: f64,
    pub orientation_error: f64,
    /// Update steps taken; 0 when the seed already met the tolerance.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum IkError {
    #[error(
        "target unreachable: residual {position_error:.4} m / {orientation_error:.4} rad after {iterations} iterations"
    )]
    Unreachable {
        /// Best configuration found.
        best: JointConfig,
        position_error: f64,
        orientation_error: f64,
        iterations: usize,
    },
}

impl IkError {
    pub fn best(&self) -> IkSolution {
        let IkError::Unreachable {
            best,
            position_error,
            orientation_error,
            iterations,
        } = *self;
        IkSolution {
            q: best,
            position_error,
            orientation_error,
            iterations,
        }
    }
}

#[derive(Clone, Copy)]
enum Target<'a> {
    Pose(&'a HandPose),
    Position(&'a [f64; 3]),
}

/// Axis-angle vector of `r`, accurate down to tiny angles.
fn rotation_log(r: &Rotation3<f64>) -> Vector3<f64> {
    let m = r.matrix();
    let v = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin = v.norm();
    if sin < 1e-9 {
        // identity (v is already angle * axis) or a half turn
        return if cos > 0.0 { v } else { r.scaled_axis() };
    }
    v * (sin.atan2(cos) / sin)
}

fn clamp_norm(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

fn geometric_jacobian(poses: &ChainPoses) -> Jacobian {
    let mut j = Jacobian::zeros();
    for k in 0..JOINT_COUNT {
        let axis = poses.axes[k];
        let linear = axis.cross(&(poses.tip - poses.origins[k]));
        j.fixed_view_mut::<3, 1>(0, k).copy_from(&linear);
        j.fixed_view_mut::<3, 1>(3, k).copy_from(&axis);
    }
    j
}

fn residual(poses: &ChainPoses, target: Target<'_>) -> (Vector3<f64>, Vector3<f64>) {
    match target {
        Target::Pose(pose) => {
            let dp = pose.translation() - poses.tip;
            let dr = rotation_log(&(pose.rotation() * poses.rotation.inverse()));
            (dp, dr)
        }
        Target::Position(p) => (Vector3::from(*p) - poses.tip, Vector3::zeros()),
    }
}

fn solve(
    model: &ArmModel,
    target: Target<'_>,
    seed: &JointConfig,
    config: &IkConfig,
) -> Result<IkSolution, IkError> {
    let mut q = model.clamp(seed);
    let mut best = (f64::INFINITY, q, f64::INFINITY, f64::INFINITY);
    let position_only = matches!(target, Target::Position(_));
    let lambda2 = config.damping * config.damping;

    for iteration in 0..=config.max_iterations {
        let poses = chain_poses(model, &q);
        let (dp, dr) = residual(&poses, target);
        let (pe, oe) = (dp.norm(), dr.norm());
        if pe <= config.position_tolerance && oe <= config.orientation_tolerance {
            return Ok(IkSolution {
                q,
                position_error: pe,
                orientation_error: oe,
                iterations: iteration,
            });
        }
        let score = (pe / config.position_tolerance).max(oe / config.orientation_tolerance);
        if score < best.0 {
            best = (score, q, pe, oe);
        }
        if iteration == config.max_iterations {
            break;
        }

        let mut jac = geometric_jacobian(&poses);
        if position_only {
            jac.fixed_view_mut::<3, JOINT_COUNT>(3, 0).fill(0.0);
        }
        let mut err = Vector6::zeros();
        err.fixed_rows_mut::<3>(0)
            .copy_from(&clamp_norm(dp, config.max_position_step));
        err.fixed_rows_mut::<3>(3)
            .copy_from(&clamp_norm(dr, config.max_orientation_step));

        let jjt = jac * jac.transpose() + Matrix6::identity() * lambda2;
        let Some(y) = jjt.cholesky().map(|c| c.solve(&err)) else {
            break;
        };
        let dq = jac.transpose() * y;
        for k in 0..JOINT_COUNT {
            q.0[k] += dq[k];
        }
        q = model.clamp(&q);
    }

    let (_, best_q, pe, oe) = best;
    Err(IkError::Unreachable {
        best: best_q,
        position_error: pe,
        orientation_error: oe,
        iterations: config.max_iterations,
    })
}

/// Joint angles placing the hand frame at `target`, starting from `seed`
/// (clamped into limits first). Deterministic for identical inputs.
pub fn solve_ik(
    model: &ArmModel,
    target: &HandPose,
    seed: &JointConfig,
    config: &IkConfig,
) -> Result<IkSolution, IkError> {
    solve(model, Target::Pose(target), seed, config)
}

/// Position-only variant; orientation is left free.
pub fn solve_ik_position(
    model: &ArmModel,
    target: &[f64; 3],
    seed: &JointConfig,
    config: &IkConfig,
) -> Result<IkSolution, IkError> {
    solve(model, Target::Position(target), seed, config)
}

/// IK outcome for one hand of a keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandReach {
    pub feasible: bool,
    pub q: JointConfig,
    pub position_error: f64,
    pub orientation_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityReport {
    pub left: HandReach,
    pub right: HandReach,
}

impl ReachabilityReport {
    pub fn feasible(&self) -> bool {
        self.left.feasible && self.right.feasible
    }

    pub fn hand(&self, side: Side) -> &HandReach {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

fn restart_seeds(arm: &ArmModel, n: usize) -> impl Iterator<Item = JointConfig> + '_ {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d5eed);
    (0..n).map(move |_| JointConfig(arm.joint_limits.map(|l| rng.random_range(l.lo..=l.hi))))
}

/// Tries the caller's seed first, then the arm's fallback seeds, then the
/// random restarts.
fn reach_hand(arm: &ArmModel, pose: &HandPose, seed: Option<&JointConfig>, config: &IkConfig) -> HandReach {
    let mut best: Option<IkSolution> = None;
    let seeds = seed
        .copied()
        .into_iter()
        .chain(arm.fallback_seeds())
        .chain(restart_seeds(arm, config.restarts));
    for s in seeds {
        match solve_ik(arm, pose, &s, config) {
            Ok(sol) => {
                return HandReach {
                    feasible: true,
                    q: sol.q,
                    position_error: sol.position_error,
                    orientation_error: sol.orientation_error,
                }
            }
            Err(err) => {
                let b = err.best();
                let better = best.is_none_or(|cur| {
                    b.position_error / config.position_tolerance
                        + b.orientation_error / config.orientation_tolerance
                        < cur.position_error / config.position_tolerance
                            + cur.orientation_error / config.orientation_tolerance
                });
                if better {
                    best = Some(b);
                }
            }
        }
    }
    let b = best.expect("at least one seed is tried");
    HandReach {
        feasible: false,
        q: b.q,
        position_error: b.position_error,
        orientation_error: b.orientation_error,
    }
}

/// Runs IK for both hands of `state`. `seeds` defaults to the rest configs.
pub fn check_reachability(
    body: &BodyModel,
    state: &MotionState,
    seeds: Option<(&JointConfig, &JointConfig)>,
    config: &IkConfig,
) -> ReachabilityReport {
    let (seed_l, seed_r) = seeds.unwrap_or((&body.left.rest, &body.right.rest));
    let pose = |side: Side| {
        let hand = state.hand(side);
        HandPose::new(hand.position, hand.orientation)
    };
    ReachabilityReport {
        left: reach_hand(&body.left, &pose(Side::Left), Some(seed_l), config),
        right: reach_hand(&body.right, &pose(Side::Right), Some(seed_r), config),
    }
}
