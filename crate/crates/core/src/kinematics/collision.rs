//! Capsule proxies for self-collision.
//!
//! Each arm carries three capsules (upper arm, forearm, hand) and the torso
//! one. Only the distal links are tested: forearms and hands against each
//! other across arms, and each hand against the torso.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::chain::chain_poses;
use super::model::{ArmModel, BodyModel, JointConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Self {
        Self { a, b, radius }
    }

    /// Surface-to-surface distance; negative when overlapping.
    pub fn clearance(&self, other: &Capsule) -> f64 {
        segment_distance(&self.a, &self.b, &other.a, &other.b) - self.radius - other.radius
    }
}

/// Closest distance between segments `p1q1` and `p2q2`.
pub fn segment_distance(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> f64 {
    const EPS: f64 = 1e-12;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmCapsules {
    pub upper_arm: Capsule,
    pub forearm: Capsule,
    pub hand: Capsule,
}

pub fn arm_capsules(model: &ArmModel, q: &JointConfig) -> ArmCapsules {
    let p = chain_poses(model, q);
    ArmCapsules {
        upper_arm: Capsule::new(p.shoulder, p.elbow, model.upper_arm_radius),
        forearm: Capsule::new(p.elbow, p.wrist, model.forearm_radius),
        hand: Capsule::new(p.wrist, p.tip, model.hand_radius),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPart {
    LeftForearm,
    LeftHand,
    RightForearm,
    RightHand,
    Torso,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairClearance {
    pub a: BodyPart,
    pub b: BodyPart,
    /// Meters; negative when the capsules overlap.
    pub clearance: f64,
    /// `clearance < margin`.
    pub colliding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub pairs: Vec<PairClearance>,
    pub margin: f64,
}

impl CollisionReport {
    pub fn collides(&self) -> bool {
        self.pairs.iter().any(|p| p.colliding)
    }

    pub fn colliding_pairs(&self) -> impl Iterator<Item = &PairClearance> {
        self.pairs.iter().filter(|p| p.colliding)
    }

    pub fn min_clearance(&self) -> f64 {
        self.pairs.iter().map(|p| p.clearance).fold(f64::INFINITY, f64::min)
    }

    /// Checks the distal-link pairs of two posed arms against each other and the torso.
    pub fn from_capsules(left: &ArmCapsules, right: &ArmCapsules, torso: &Capsule, margin: f64) -> Self {
        use BodyPart::*;
        let checks = [
            (LeftForearm, &left.forearm, RightForearm, &right.forearm),
            (LeftForearm, &left.forearm, RightHand, &right.hand),
            (LeftHand, &left.hand, RightForearm, &right.forearm),
            (LeftHand, &left.hand, RightHand, &right.hand),
            (LeftHand, &left.hand, Torso, torso),
            (RightHand, &right.hand, Torso, torso),
        ];
        let pairs = checks
            .into_iter()
            .map(|(a, ca, b, cb)| {
                let clearance = ca.clearance(cb);
                PairClearance {
                    a,
                    b,
                    clearance,
                    colliding: clearance < margin,
                }
            })
            .collect();
        Self { pairs, margin }
    }
}

pub fn torso_capsule(body: &BodyModel) -> Capsule {
    Capsule::new(
        Vector3::from(body.torso.bottom),
        Vector3::from(body.torso.top),
        body.torso.radius,
    )
}

/// Capsule clearance check for a pair of arm configurations.
pub fn check_self_collision(body: &BodyModel, q_left: &JointConfig, q_right: &JointConfig) -> CollisionReport {
    CollisionReport::from_capsules(
        &arm_capsules(&body.left, q_left),
        &arm_capsules(&body.right, q_right),
        &torso_capsule(body),
        body.collision_margin,
    )
}
