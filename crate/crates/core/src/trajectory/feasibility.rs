//! Reachability at keyframes and self-collision along the dense samples.

use serde::{Deserialize, Serialize};

use super::DenseTrajectory;
use crate::kinematics::{
    check_reachability, check_self_collision, solve_ik, BodyModel, BodyPart, HandPose, IkConfig, JointConfig,
    ReachabilityReport,
};
use crate::motion::{MotionState, Side};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailurePoint {
    /// 1-based keyframe index.
    Unreachable { keyframe: usize, side: Side },
    /// 0-based sample index.
    Collision { sample: usize, a: BodyPart, b: BodyPart },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub keyframes: Vec<ReachabilityReport>,
    /// 1-based indices of keyframes with an unreachable hand.
    pub unreachable_keyframes: Vec<usize>,
    /// One flag per dense sample.
    pub collision_flags: Vec<bool>,
    /// Smallest clearance seen at each sample, meters.
    pub min_clearance: Vec<f64>,
    /// Per-sample `[left, right]` joint solutions.
    pub joint_solutions: Vec<[JointConfig; 2]>,
    pub first_failure: Option<FailurePoint>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.unreachable_keyframes.is_empty() && !self.collision_flags.iter().any(|&c| c)
    }

    pub fn collision_samples(&self) -> Vec<usize> {
        self.collision_flags
            .iter()
            .enumerate()
            .filter_map(|(k, &c)| c.then_some(k))
            .collect()
    }

    pub fn collision_count(&self) -> usize {
        self.collision_flags.iter().filter(|&&c| c).count()
    }

    /// One-line human-readable diagnostic, used in regeneration prompts.
    pub fn summary(&self) -> String {
        if self.feasible() {
            return "feasible: all keyframes reachable, no self-collision".to_string();
        }
        let mut parts = Vec::new();
        for &k in &self.unreachable_keyframes {
            let r = &self.keyframes[k - 1];
            let sides: Vec<&str> = Side::BOTH
                .iter()
                .filter(|&&s| !r.hand(s).feasible)
                .map(|s| s.as_str())
                .collect();
            parts.push(format!("keyframe t={k} unreachable for the {} hand", sides.join(" and ")));
        }
        let samples = self.collision_samples();
        if let (Some(first), Some(last)) = (samples.first(), samples.last()) {
            parts.push(format!(
                "self-collision at {} samples ({}..={})",
                samples.len(),
                first,
                last
            ));
        }
        parts.join("; ")
    }
}

fn pose(state: &MotionState, side: Side) -> HandPose {
    let h = state.hand(side);
    HandPose::new(h.position, h.orientation)
}

/// Keyframe IK is warm-started by
/// the previous keyframe's solution (with fallback seeds); sample IK is
/// warm-started by the previous sample and only feeds collision checks.
pub fn check_trajectory(traj: &DenseTrajectory, body: &BodyModel, config: &IkConfig) -> FeasibilityReport {
    let mut keyframes = Vec::new();
    let mut unreachable_keyframes = Vec::new();
    let mut first_failure = None;
    let mut seeds = (body.left.rest, body.right.rest);
    for (j, state) in traj.keyframes.iter().enumerate() {
        let report = check_reachability(body, state, Some((&seeds.0, &seeds.1)), config);
        seeds = (report.left.q, report.right.q);
        if !report.feasible() {
            unreachable_keyframes.push(j + 1);
            if first_failure.is_none() {
                let side = if report.left.feasible { Side::Right } else { Side::Left };
                first_failure = Some(FailurePoint::Unreachable { keyframe: j + 1, side });
            }
        }
        keyframes.push(report);
    }

    let mut collision_flags = Vec::with_capacity(traj.samples.len());
    let mut min_clearance = Vec::with_capacity(traj.samples.len());
    let mut joint_solutions = Vec::with_capacity(traj.samples.len());
    let mut q = keyframes
        .first()
        .map(|r| (r.left.q, r.right.q))
        .unwrap_or((body.left.rest, body.right.rest));
    let mut first_collision = None;
    for (k, sample) in traj.samples.iter().enumerate() {
        let solve = |side: Side, seed: &JointConfig| {
            let arm = body.arm(side);
            match solve_ik(arm, &pose(sample, side), seed, config) {
                Ok(sol) => sol.q,
                Err(err) => err.best().q,
            }
        };
        q = (solve(Side::Left, &q.0), solve(Side::Right, &q.1));
        let report = check_self_collision(body, &q.0, &q.1);
        let hit = report.colliding_pairs().next().copied();
        if let (Some(pair), None) = (hit, first_collision) {
            first_collision = Some(FailurePoint::Collision {
                sample: k,
                a: pair.a,
                b: pair.b,
            });
        }
        collision_flags.push(hit.is_some());
        min_clearance.push(report.min_clearance());
        joint_solutions.push([q.0, q.1]);
    }

    // report whichever failure occurs first in time
    let first_failure = match (first_failure, first_collision) {
        (Some(u @ FailurePoint::Unreachable { keyframe, .. }), Some(c @ FailurePoint::Collision { sample, .. })) => {
            let t = traj.keyframe_times.get(keyframe - 1).copied().unwrap_or(0.0);
            if (sample as f64) < t * traj.rate {
                Some(c)
            } else {
                Some(u)
            }
        }
        (u, c) => u.or(c),
    };

    FeasibilityReport {
        keyframes,
        unreachable_keyframes,
        collision_flags,
        min_clearance,
        joint_solutions,
        first_failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::hand_pose;
    use crate::motion::{HandState, MotionSequence};
    use crate::trajectory::interpolate;

    fn state_from_joints(body: &BodyModel, ql: &JointConfig, qr: &JointConfig) -> MotionState {
        let l = hand_pose(&body.left, ql);
        let r = hand_pose(&body.right, qr);
        MotionState::new(
            HandState::new(l.position, l.orientation, [0.3; 5]),
            HandState::new(r.position, r.orientation, [0.3; 5]),
        )
    }

    #[test]
    fn rest_hold_is_feasible() {
        let body = BodyModel::default();
        let s = state_from_joints(&body, &body.left.rest, &body.right.rest);
        let seq = MotionSequence::constant(s, 4, 0.5).unwrap();
        let traj = interpolate(&seq, 20.0).unwrap();
        let report = check_trajectory(&traj, &body, &IkConfig::default());
        assert!(report.feasible(), "{}", report.summary());
        assert_eq!(report.keyframes.len(), 4);
        assert_eq!(report.collision_flags.len(), traj.samples.len());
        assert_eq!(report.first_failure, None);
    }

    #[test]
    fn unreachable_keyframe_is_named() {
        let body = BodyModel::default();
        let rest = state_from_joints(&body, &body.left.rest, &body.right.rest);
        let mut far = rest;
        far.right.position = [0.6, -0.7, -0.6];
        let seq = MotionSequence::new(vec![rest, rest, far, rest], 0.5).unwrap();
        let traj = interpolate(&seq, 20.0).unwrap();
        let report = check_trajectory(&traj, &body, &IkConfig::default());
        assert!(!report.feasible());
        assert_eq!(report.unreachable_keyframes, vec![3]);
        assert!(report.keyframes[2].left.feasible);
        assert!(!report.keyframes[2].right.feasible);
        assert!(report.summary().contains("t=3"));
    }

    #[test]
    fn meeting_hands_collide_mid_trajectory() {
        let body = BodyModel::default();
        // hands start apart in front of the chest, meet at y = 0, and part again
        let mk = |yl: f64| {
            MotionState::new(
                HandState::new([0.35, yl, 0.05], [0.0; 3], [0.3; 5]),
                HandState::new([0.35, -yl, 0.05], [0.0; 3], [0.3; 5]),
            )
        };
        let seq = MotionSequence::new(vec![mk(0.3), mk(0.0), mk(0.3)], 1.0).unwrap();
        let traj = interpolate(&seq, 10.0).unwrap();
        let report = check_trajectory(&traj, &body, &IkConfig::default());
        let flagged = report.collision_samples();
        assert!(report.collision_flags[10], "midpoint must collide");
        assert!(!report.collision_flags[0]);
        assert!(flagged.iter().all(|&k| k > 0 && k < traj.samples.len() - 1));
        assert!(matches!(report.first_failure, Some(FailurePoint::Collision { .. })));
    }
}
