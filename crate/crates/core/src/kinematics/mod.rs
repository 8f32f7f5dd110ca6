//! Simplified humanoid upper body: two 7-DoF arms and a torso capsule.
//!
//! Chain convention: at zero angles an arm hangs straight down (-z). Joint
//! order is shoulder pitch, shoulder roll, shoulder yaw, elbow, wrist roll,
//! wrist pitch, wrist yaw. Positive pitch and elbow flexion swing the distal
//! links forward (+x); positive shoulder roll abducts away from the body.
//! The right arm mirrors the left through the sagittal plane, so a config
//! and its mirror give mirrored hand positions. The hand frame has x along
//! the fingers and z out of the back of the palm.
//!
//! Fingers do not enter the kinematics; they are actuated aperture scalars.

mod chain;
mod collision;
mod ik;
mod model;

pub use chain::{forward_kinematics, hand_pose, ChainPoses, HandPose};
pub use collision::{
    arm_capsules, check_self_collision, segment_distance, torso_capsule, ArmCapsules, BodyPart, Capsule,
    CollisionReport, PairClearance,
};
pub use ik::{
    check_reachability, solve_ik, solve_ik_position, HandReach, IkConfig, IkError, IkSolution,
    ReachabilityReport,
};
pub use model::{ArmModel, BodyModel, JointConfig, JointLimit, ModelError, TorsoModel, JOINT_COUNT, JOINT_NAMES};

use nalgebra::Rotation3;

/// Rotation of the intrinsic Z-Y-X Euler triple `[roll, pitch, yaw]`.
pub fn euler_to_rotation(rpy: &[f64; 3]) -> Rotation3<f64> {
    Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2])
}

/// `[roll, pitch, yaw]` of a rotation, each in `[-pi, pi]`.
pub fn rotation_to_euler(rotation: &Rotation3<f64>) -> [f64; 3] {
    let (roll, pitch, yaw) = rotation.euler_angles();
    [roll, pitch, yaw]
}

/// Geodesic angle between two rotations, radians in `[0, pi]`.
pub fn geodesic_angle(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    (a.transpose() * b).angle()
}
