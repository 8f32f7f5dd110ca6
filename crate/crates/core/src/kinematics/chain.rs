use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::model::{ArmModel, JointConfig, JOINT_COUNT};
use super::rotation_to_euler;
use crate::motion::Side;

/// Hand position (meters) and `[roll, pitch, yaw]` orientation (radians),
/// torso frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandPose {
    pub position: [f64; 3],
    pub orientation: [f64; 3],
}

impl HandPose {
    pub fn new(position: [f64; 3], orientation: [f64; 3]) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        super::euler_to_rotation(&self.orientation)
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }
}

/// Every frame of the chain needed by IK and collision checks.
#[derive(Debug, Clone)]
pub struct ChainPoses {
    pub shoulder: Vector3<f64>,
    pub elbow: Vector3<f64>,
    pub wrist: Vector3<f64>,
    /// Hand frame origin at the fingertip end of the hand link.
    pub tip: Vector3<f64>,
    /// Joint axes in the torso frame, chain order.
    pub axes: [Vector3<f64>; JOINT_COUNT],
    /// Point on each joint axis, chain order.
    pub origins: [Vector3<f64>; JOINT_COUNT],
    /// Hand frame orientation in the torso frame.
    pub rotation: Rotation3<f64>,
}

/// Joint axes in their parent link frames.
pub(crate) fn local_axes(side: Side) -> [Vector3<f64>; JOINT_COUNT] {
    let m = side.lateral_sign();
    let pitch = Vector3::new(0.0, -1.0, 0.0);
    [
        pitch,
        Vector3::new(m, 0.0, 0.0),
        Vector3::new(0.0, 0.0, m),
        pitch,
        Vector3::new(0.0, 0.0, m),
        pitch,
        Vector3::new(m, 0.0, 0.0),
    ]
}

/// Fixed rotation from the last wrist frame to the hand frame: x along the
/// link (down at zero angles), z out of the back of the palm (lateral).
pub(crate) fn hand_mount(side: Side) -> Rotation3<f64> {
    let m = side.lateral_sign();
    Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(-m, 0.0, 0.0),
        Vector3::new(0.0, m, 0.0),
    ]))
}

/// Walks the chain. Joint limits are not checked here.
pub fn chain_poses(model: &ArmModel, q: &JointConfig) -> ChainPoses {
    let local = local_axes(model.side);
    let down = Vector3::new(0.0, 0.0, -1.0);
    let shoulder = Vector3::from(model.shoulder_offset);

    let mut axes = [Vector3::zeros(); JOINT_COUNT];
    let mut origins = [Vector3::zeros(); JOINT_COUNT];
    let mut rot = Rotation3::identity();
    let mut pos = shoulder;
    let mut elbow = shoulder;
    let mut wrist = shoulder;

    for j in 0..JOINT_COUNT {
        if j == 3 {
            pos += rot * (down * model.upper_arm_length);
            elbow = pos;
        } else if j == 4 {
            pos += rot * (down * model.forearm_length);
            wrist = pos;
        }
        let axis = rot * local[j];
        axes[j] = axis;
        origins[j] = pos;
        rot *= Rotation3::from_axis_angle(&Unit::new_unchecked(local[j]), q.0[j]);
    }
    let tip = pos + rot * (down * model.hand_length);

    ChainPoses {
        shoulder,
        elbow,
        wrist,
        tip,
        axes,
        origins,
        rotation: rot * hand_mount(model.side),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("joint {joint} angle {angle} outside [{lo}, {hi}]")]
pub struct JointLimitViolation {
    pub joint: &'static str,
    pub angle: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Hand pose for a within-limit configuration.
pub fn forward_kinematics(model: &ArmModel, q: &JointConfig) -> Result<HandPose, JointLimitViolation> {
    if let Some(j) = model.first_limit_violation(q) {
        let limit = model.joint_limits[j];
        return Err(JointLimitViolation {
            joint: super::JOINT_NAMES[j],
            angle: q.0[j],
            lo: limit.lo,
            hi: limit.hi,
        });
    }
    Ok(hand_pose(model, q))
}

/// Hand pose without the limit check.
pub fn hand_pose(model: &ArmModel, q: &JointConfig) -> HandPose {
    let poses = chain_poses(model, q);
    HandPose {
        position: poses.tip.into(),
        orientation: rotation_to_euler(&poses.rotation),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::BodyModel;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() <= tol)
    }

    #[test]
    fn zero_config_hangs_straight_down() {
        let body = BodyModel::default();
        for arm in [&body.left, &body.right] {
            let pose = forward_kinematics(arm, &JointConfig::ZERO).unwrap();
            let s = arm.shoulder_offset;
            assert!(close(pose.position, [s[0], s[1], s[2] - 0.63], 1e-12));
        }
    }

    #[test]
    fn right_angle_elbow_points_forward() {
        let body = BodyModel::default();
        let mut q = JointConfig::ZERO;
        q.0[3] = FRAC_PI_2;
        for arm in [&body.left, &body.right] {
            let pose = forward_kinematics(arm, &q).unwrap();
            let s = arm.shoulder_offset;
            assert!(close(pose.position, [s[0] + 0.33, s[1], s[2] - 0.30], 1e-12));
        }
    }

    #[test]
    fn abduction_moves_away_from_body() {
        let body = BodyModel::default();
        let mut q = JointConfig::ZERO;
        q.0[1] = FRAC_PI_2;
        let left = hand_pose(&body.left, &q);
        let right = hand_pose(&body.right, &q);
        assert!(close(left.position, [0.0, 0.83, 0.40], 1e-12));
        assert!(close(right.position, [0.0, -0.83, 0.40], 1e-12));
    }

    #[test]
    fn hand_frame_at_zero() {
        let body = BodyModel::default();
        let poses = chain_poses(&body.left, &JointConfig::ZERO);
        let m = poses.rotation.matrix();
        // fingers down, palm back facing outward (+y for the left hand)
        assert!((m.column(0) - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!((m.column(2) - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((m.determinant() - 1.0).abs() < 1e-12);
        let r = chain_poses(&body.right, &JointConfig::ZERO).rotation;
        assert!((r.matrix().column(2) - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_limit_config_is_rejected() {
        let body = BodyModel::default();
        let mut q = JointConfig::ZERO;
        q.0[3] = -0.1;
        let err = forward_kinematics(&body.left, &q).unwrap_err();
        assert_eq!(err.joint, "elbow");
    }

    #[test]
    fn mirrored_configs_give_mirrored_positions() {
        let body = BodyModel::default();
        let q = JointConfig([0.7, 0.4, -0.3, 1.1, 0.5, -0.2, 0.3]);
        let l = hand_pose(&body.left, &q).position;
        let r = hand_pose(&body.right, &q).position;
        assert!(close(l, [r[0], -r[1], r[2]], 1e-12));
    }
}
