use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::motion::Side;

pub const JOINT_COUNT: usize = 7;

pub const JOINT_NAMES: [&str; JOINT_COUNT] = [
    "shoulder_pitch",
    "shoulder_roll",
    "shoulder_yaw",
    "elbow",
    "wrist_roll",
    "wrist_pitch",
    "wrist_yaw",
];

const DEFAULT_BODY_TOML: &str = include_str!("../../assets/body_model.toml");

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: String, value: f64 },
    #[error("joint {joint}: lower limit {lo} is not below upper limit {hi}")]
    InvertedLimit { joint: &'static str, lo: f64, hi: f64 },
    #[error("{0} arm is declared with the wrong side")]
    WrongSide(Side),
    #[error("reading body model {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing body model: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimit {
    pub lo: f64,
    pub hi: f64,
}

impl JointLimit {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, angle: f64) -> bool {
        angle >= self.lo && angle <= self.hi
    }

    pub fn clamp(&self, angle: f64) -> f64 {
        angle.clamp(self.lo, self.hi)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Joint angles of one arm, radians, ordered as [`JOINT_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub [f64; JOINT_COUNT]);

impl JointConfig {
    pub const ZERO: JointConfig = JointConfig([0.0; JOINT_COUNT]);

    pub fn angles(&self) -> &[f64; JOINT_COUNT] {
        &self.0
    }

    /// Max absolute per-joint difference.
    pub fn max_abs_diff(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One kinematic arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub side: Side,
    /// Shoulder joint center in the torso frame, meters.
    pub shoulder_offset: [f64; 3],
    pub upper_arm_length: f64,
    pub forearm_length: f64,
    pub hand_length: f64,
    pub joint_limits: [JointLimit; JOINT_COUNT],
    pub upper_arm_radius: f64,
    pub forearm_radius: f64,
    pub hand_radius: f64,
    /// Default IK seed; hands resting at the sides.
    pub rest: JointConfig,
}

impl ArmModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("upper_arm_length", self.upper_arm_length),
            ("forearm_length", self.forearm_length),
            ("hand_length", self.hand_length),
            ("upper_arm_radius", self.upper_arm_radius),
            ("forearm_radius", self.forearm_radius),
            ("hand_radius", self.hand_radius),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositive {
                    field: format!("{}.{field}", self.side),
                    value,
                });
            }
        }
        for (limit, joint) in self.joint_limits.iter().zip(JOINT_NAMES) {
            if !(limit.lo < limit.hi) {
                return Err(ModelError::InvertedLimit {
                    joint,
                    lo: limit.lo,
                    hi: limit.hi,
                });
            }
        }
        Ok(())
    }

    /// Upper arm + forearm + hand.
    pub fn reach(&self) -> f64 {
        self.upper_arm_length + self.forearm_length + self.hand_length
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        q.0.iter()
            .zip(self.joint_limits.iter())
            .all(|(a, l)| l.contains(*a))
    }

    /// Index of the first joint outside its limit.
    pub fn first_limit_violation(&self, q: &JointConfig) -> Option<usize> {
        q.0.iter()
            .zip(self.joint_limits.iter())
            .position(|(a, l)| !l.contains(*a))
    }

    pub fn clamp(&self, q: &JointConfig) -> JointConfig {
        let mut out = *q;
        for (a, l) in out.0.iter_mut().zip(self.joint_limits.iter()) {
            *a = l.clamp(*a);
        }
        out
    }

    /// Mirror image of this arm through the sagittal plane.
    pub fn mirrored(&self) -> ArmModel {
        let mut out = self.clone();
        out.side = match self.side {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        out.shoulder_offset[1] = -self.shoulder_offset[1];
        out
    }

    /// Fixed IK seeds tried after the caller's seed fails.
    pub fn fallback_seeds(&self) -> Vec<JointConfig> {
        [
            self.rest.0,
            [1.2, 0.2, 0.0, 1.2, 0.0, 0.0, 0.0],
            [0.6, 1.2, 0.0, 1.4, 0.0, 0.0, 0.0],
            [2.2, 0.3, 0.0, 0.8, 0.0, 0.0, 0.0],
            [1.4, 0.1, 0.8, 1.9, 0.0, 0.0, 0.0],
            [1.0, 0.6, -0.8, 1.6, 1.0, 0.0, 0.0],
            [1.7, 0.9, 0.4, 2.0, -1.0, 0.0, 0.0],
            [0.3, 0.4, 0.0, 2.2, 0.0, 0.0, 0.0],
        ]
        .into_iter()
        .map(|q| self.clamp(&JointConfig(q)))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsoModel {
    /// Capsule axis endpoints, torso frame.
    pub bottom: [f64; 3],
    pub top: [f64; 3],
    pub radius: f64,
}

/// Both arms, the torso proxy and the collision margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyModel {
    pub left: ArmModel,
    pub right: ArmModel,
    pub torso: TorsoModel,
    /// Minimum allowed clearance between checked capsule pairs, meters.
    pub collision_margin: f64,
}

impl Default for BodyModel {
    fn default() -> Self {
        Self::from_toml(DEFAULT_BODY_TOML).expect("bundled body model is valid")
    }
}

impl BodyModel {
    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        let model: BodyModel = toml::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// The bundled default model as TOML text.
    pub fn default_toml() -> &'static str {
        DEFAULT_BODY_TOML
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.left.side != Side::Left {
            return Err(ModelError::WrongSide(Side::Left));
        }
        if self.right.side != Side::Right {
            return Err(ModelError::WrongSide(Side::Right));
        }
        self.left.validate()?;
        self.right.validate()?;
        if !(self.torso.radius > 0.0) {
            return Err(ModelError::NonPositive {
                field: "torso.radius".into(),
                value: self.torso.radius,
            });
        }
        if !(self.collision_margin >= 0.0) {
            return Err(ModelError::NonPositive {
                field: "collision_margin".into(),
                value: self.collision_margin,
            });
        }
        Ok(())
    }

    pub fn arm(&self, side: Side) -> &ArmModel {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_model_matches_documented_defaults() {
        let body = BodyModel::default();
        assert_eq!(body.left.shoulder_offset, [0.0, 0.20, 0.40]);
        assert_eq!(body.right.shoulder_offset, [0.0, -0.20, 0.40]);
        assert_eq!(body.left.upper_arm_length, 0.30);
        assert_eq!(body.left.forearm_length, 0.25);
        assert_eq!(body.left.hand_length, 0.08);
        assert!((body.left.reach() - 0.63).abs() < 1e-12);
        assert_eq!(body.collision_margin, 0.02);
        assert_eq!(body.left.mirrored(), body.right);
        assert!(body.left.within_limits(&body.left.rest));
    }

    #[test]
    fn inverted_limit_is_rejected() {
        let mut body = BodyModel::default();
        body.left.joint_limits[3] = JointLimit::new(1.0, 0.5);
        assert!(matches!(
            body.validate(),
            Err(ModelError::InvertedLimit { joint: "elbow", .. })
        ));
    }

    #[test]
    fn zero_length_is_rejected() {
        let mut body = BodyModel::default();
        body.right.forearm_length = 0.0;
        assert!(matches!(body.validate(), Err(ModelError::NonPositive { .. })));
    }

    #[test]
    fn swapped_sides_are_rejected() {
        let mut body = BodyModel::default();
        std::mem::swap(&mut body.left, &mut body.right);
        assert!(matches!(body.validate(), Err(ModelError::WrongSide(Side::Left))));
    }

    #[test]
    fn fallback_seeds_are_in_limits() {
        let body = BodyModel::default();
        for seed in body.left.fallback_seeds() {
            assert!(body.left.within_limits(&seed));
        }
    }
}
