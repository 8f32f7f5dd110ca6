//! Keyframe motion representation shared by every stage of the pipeline.
//!
//! A [`MotionState`] holds 22 reals: for each hand (left first) the Cartesian
//! position in the torso frame, the ZYX Euler orientation stored as
//! `[roll, pitch, yaw]`, and five finger apertures from thumb to pinky.
//!
//! Torso frame: origin at the sternum midpoint, x forward, y to the robot's
//! left, z up, meters.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

mod text;

pub use text::{parse_sequence, serialize_sequence, ClampEvent, ParseError, ParseOptions, ParsedSequence};

/// Number of reals in a flattened [`MotionState`].
pub const STATE_WIDTH: usize = 22;
/// Reals per hand: position (3) + orientation (3) + fingers (5).
pub const HAND_WIDTH: usize = 11;
/// Default number of keyframes per sequence.
pub const DEFAULT_SEQUENCE_LEN: usize = 10;
/// Default spacing between keyframes, seconds.
pub const DEFAULT_KEYFRAME_DT: f64 = 0.5;

/// Column labels of the flattened state, in wire order.
pub const COLUMN_NAMES: [&str; STATE_WIDTH] = [
    "Lx", "Ly", "Lz", "Lroll", "Lpitch", "Lyaw", "Lf1", "Lf2", "Lf3", "Lf4", "Lf5", "Rx", "Ry",
    "Rz", "Rroll", "Rpitch", "Ryaw", "Rf1", "Rf2", "Rf3", "Rf4", "Rf5",
];

/// Slack around ±π inside which an orientation saturates instead of wrapping.
/// Keeps six-decimal text round trips from flipping a component across the cut.
const WRAP_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    /// +1 for the left side, -1 for the right; the sign of the lateral axis
    /// pointing away from the body.
    pub fn lateral_sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// State of one hand at a keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    /// Meters, torso frame.
    pub position: [f64; 3],
    /// Radians, `[roll, pitch, yaw]` of an intrinsic Z-Y-X rotation.
    pub orientation: [f64; 3],
    /// Thumb to pinky, 0 = fully closed, 1 = fully open.
    pub fingers: [f64; 5],
}

impl HandState {
    pub fn new(position: [f64; 3], orientation: [f64; 3], fingers: [f64; 5]) -> Self {
        Self {
            position,
            orientation,
            fingers,
        }
    }

    pub fn zeros() -> Self {
        Self::new([0.0; 3], [0.0; 3], [0.0; 5])
    }

    pub fn to_array(&self) -> [f64; HAND_WIDTH] {
        let mut out = [0.0; HAND_WIDTH];
        out[..3].copy_from_slice(&self.position);
        out[3..6].copy_from_slice(&self.orientation);
        out[6..].copy_from_slice(&self.fingers);
        out
    }

    pub fn from_array(values: &[f64; HAND_WIDTH]) -> Self {
        let mut hand = Self::zeros();
        hand.position.copy_from_slice(&values[..3]);
        hand.orientation.copy_from_slice(&values[3..6]);
        hand.fingers.copy_from_slice(&values[6..]);
        hand
    }
}

/// Both hands at one keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionState {
    pub left: HandState,
    pub right: HandState,
}

impl MotionState {
    pub fn new(left: HandState, right: HandState) -> Self {
        Self { left, right }
    }

    pub fn zeros() -> Self {
        Self::new(HandState::zeros(), HandState::zeros())
    }

    pub fn hand(&self, side: Side) -> &HandState {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn hand_mut(&mut self, side: Side) -> &mut HandState {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// Left hand then right hand, each as position, orientation, fingers.
    pub fn to_array(&self) -> [f64; STATE_WIDTH] {
        let mut out = [0.0; STATE_WIDTH];
        out[..HAND_WIDTH].copy_from_slice(&self.left.to_array());
        out[HAND_WIDTH..].copy_from_slice(&self.right.to_array());
        out
    }

    pub fn from_array(values: &[f64; STATE_WIDTH]) -> Self {
        let mut left = [0.0; HAND_WIDTH];
        let mut right = [0.0; HAND_WIDTH];
        left.copy_from_slice(&values[..HAND_WIDTH]);
        right.copy_from_slice(&values[HAND_WIDTH..]);
        Self::new(HandState::from_array(&left), HandState::from_array(&right))
    }

    /// Returns `None` unless `values` has exactly [`STATE_WIDTH`] entries.
    pub fn from_slice(values: &[f64]) -> Option<Self> {
        let array: &[f64; STATE_WIDTH] = values.try_into().ok()?;
        Some(Self::from_array(array))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SequenceError {
    #[error("a motion sequence needs at least one keyframe")]
    Empty,
    #[error("keyframe spacing must be positive and finite, got {0}")]
    InvalidKeyframeDt(f64),
}

/// Ordered keyframes with uniform spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence", into = "RawSequence")]
pub struct MotionSequence {
    states: Vec<MotionState>,
    keyframe_dt: f64,
}

impl MotionSequence {
    pub fn new(states: Vec<MotionState>, keyframe_dt: f64) -> Result<Self, SequenceError> {
        if states.is_empty() {
            return Err(SequenceError::Empty);
        }
        if !(keyframe_dt.is_finite() && keyframe_dt > 0.0) {
            return Err(SequenceError::InvalidKeyframeDt(keyframe_dt));
        }
        Ok(Self {
            states,
            keyframe_dt,
        })
    }

    /// `len` copies of `state`.
    pub fn constant(state: MotionState, len: usize, keyframe_dt: f64) -> Result<Self, SequenceError> {
        Self::new(vec![state; len], keyframe_dt)
    }

    pub fn states(&self) -> &[MotionState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn keyframe_dt(&self) -> f64 {
        self.keyframe_dt
    }

    /// `(T - 1) * keyframe_dt`.
    pub fn duration(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.keyframe_dt
    }

    pub fn with_keyframe_dt(&self, keyframe_dt: f64) -> Result<Self, SequenceError> {
        Self::new(self.states.clone(), keyframe_dt)
    }

    /// Applies `f` to every keyframe.
    pub fn map_states(&self, f: impl FnMut(&MotionState) -> MotionState) -> Self {
        Self {
            states: self.states.iter().map(f).collect(),
            keyframe_dt: self.keyframe_dt,
        }
    }

    /// Mean hand height over keyframes, `(left, right)`.
    pub fn mean_hand_height(&self) -> (f64, f64) {
        let n = self.states.len() as f64;
        let left = self.states.iter().map(|s| s.left.position[2]).sum::<f64>() / n;
        let right = self.states.iter().map(|s| s.right.position[2]).sum::<f64>() / n;
        (left, right)
    }

    pub fn into_states(self) -> Vec<MotionState> {
        self.states
    }
}

#[derive(Serialize, Deserialize)]
struct RawSequence {
    keyframe_dt: f64,
    states: Vec<MotionState>,
}

impl TryFrom<RawSequence> for MotionSequence {
    type Error = SequenceError;

    fn try_from(raw: RawSequence) -> Result<Self, Self::Error> {
        MotionSequence::new(raw.states, raw.keyframe_dt)
    }
}

impl From<MotionSequence> for RawSequence {
    fn from(seq: MotionSequence) -> Self {
        RawSequence {
            keyframe_dt: seq.keyframe_dt,
            states: seq.states,
        }
    }
}

/// Axis-aligned box that hand positions must stay inside, torso frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for WorkspaceBounds {
    fn default() -> Self {
        Self {
            min: [-0.10, -0.75, -0.70],
            max: [0.65, 0.75, 0.60],
        }
    }
}

impl WorkspaceBounds {
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| 0.5 * (self.min[i] + self.max[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Finger aperture outside `[0, 1]`.
    FingerRange,
    /// Euler component outside `[-pi, pi]`.
    AngleRange,
    /// Position outside the workspace box.
    Workspace,
    /// NaN or infinite value.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Field path such as `right.fingers[0]`.
    pub path: String,
    pub value: f64,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::FingerRange => "finger aperture outside [0, 1]",
            ViolationKind::AngleRange => "angle outside [-pi, pi]",
            ViolationKind::Workspace => "position outside workspace bounds",
            ViolationKind::NonFinite => "non-finite value",
        };
        write!(f, "{} = {}: {what}", self.path, self.value)
    }
}

/// Result of [`validate_state`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every violated state invariant. Never fails.
pub fn validate_state(state: &MotionState, bounds: &WorkspaceBounds) -> ValidationReport {
    const AXES: [&str; 3] = ["x", "y", "z"];
    let mut violations = Vec::new();
    for side in Side::BOTH {
        let hand = state.hand(side);
        for (i, &value) in hand.position.iter().enumerate() {
            let path = format!("{side}.position.{}", AXES[i]);
            if !value.is_finite() {
                violations.push(Violation {
                    path,
                    value,
                    kind: ViolationKind::NonFinite,
                });
            } else if value < bounds.min[i] || value > bounds.max[i] {
                violations.push(Violation {
                    path,
                    value,
                    kind: ViolationKind::Workspace,
                });
            }
        }
        for (i, &value) in hand.orientation.iter().enumerate() {
            let path = format!("{side}.orientation[{i}]");
            if !value.is_finite() {
                violations.push(Violation {
                    path,
                    value,
                    kind: ViolationKind::NonFinite,
                });
            } else if !(-PI..=PI).contains(&value) {
                violations.push(Violation {
                    path,
                    value,
                    kind: ViolationKind::AngleRange,
                });
            }
        }
        for (i, &value) in hand.fingers.iter().enumerate() {
            let path = format!("{side}.fingers[{i}]");
            if !value.is_finite() {
                violations.push(Violation {
                    path,
                    value,
                    kind: ViolationKind::NonFinite,
                });
            } else if !(0.0..=1.0).contains(&value) {
                violations.push(Violation {
                    path,
                    value,
                    kind: ViolationKind::FingerRange,
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Validates every keyframe, prefixing paths with the 1-based keyframe index.
pub fn validate_sequence(seq: &MotionSequence, bounds: &WorkspaceBounds) -> ValidationReport {
    let mut violations = Vec::new();
    for (k, state) in seq.states().iter().enumerate() {
        for mut v in validate_state(state, bounds).violations {
            v.path = format!("t={}.{}", k + 1, v.path);
            violations.push(v);
        }
    }
    ValidationReport { violations }
}

/// Wraps an angle into `[-pi, pi]`. Values already in range are returned
/// unchanged; values within a rounding slack outside saturate to ±pi.
pub fn wrap_angle(angle: f64) -> f64 {
    if (-PI..=PI).contains(&angle) {
        angle
    } else if angle.abs() <= PI + WRAP_SLACK {
        angle.signum() * PI
    } else {
        (angle + PI).rem_euclid(TAU) - PI
    }
}

/// Projects a state onto the valid set: positions saturate at the workspace
/// box, angles wrap, fingers saturate at `[0, 1]`. Non-finite values are
/// replaced (box center, zero angle, half-open fingers). Idempotent.
pub fn clamp_state(state: &MotionState, bounds: &WorkspaceBounds) -> MotionState {
    let center = bounds.center();
    let mut out = *state;
    for side in Side::BOTH {
        let hand = out.hand_mut(side);
        for i in 0..3 {
            let p = hand.position[i];
            hand.position[i] = if p.is_nan() {
                center[i]
            } else {
                p.clamp(bounds.min[i], bounds.max[i])
            };
        }
        for a in hand.orientation.iter_mut() {
            *a = if a.is_finite() { wrap_angle(*a) } else { 0.0 };
        }
        for f in hand.fingers.iter_mut() {
            *f = if f.is_nan() { 0.5 } else { f.clamp(0.0, 1.0) };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior_state() -> MotionState {
        let hand = |y: f64| HandState::new([0.2, y, -0.1], [0.1, -0.2, 0.3], [0.5; 5]);
        MotionState::new(hand(0.25), hand(-0.25))
    }

    #[test]
    fn flattening_is_22_wide_and_ordered() {
        let state = interior_state();
        let flat = state.to_array();
        assert_eq!(flat.len(), 22);
        assert_eq!(flat[..3], state.left.position);
        assert_eq!(flat[11..14], state.right.position);
        assert_eq!(flat[17..], state.right.fingers);
        assert_eq!(MotionState::from_array(&flat), state);
        assert!(MotionState::from_slice(&flat[..21]).is_none());
    }

    #[test]
    fn interior_state_is_valid() {
        let report = validate_state(&interior_state(), &WorkspaceBounds::default());
        assert!(report.is_valid(), "{report:?}");
    }

    #[test]
    fn out_of_range_thumb_is_reported_once() {
        let mut state = interior_state();
        state.right.fingers[0] = 1.3;
        let report = validate_state(&state, &WorkspaceBounds::default());
        assert_eq!(report.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.path, "right.fingers[0]");
        assert_eq!(v.value, 1.3);
        assert_eq!(v.kind, ViolationKind::FingerRange);
    }

    #[test]
    fn position_below_floor_is_a_workspace_violation() {
        let bounds = WorkspaceBounds::default();
        assert_eq!(bounds.min[2], -0.70);
        let mut state = interior_state();
        state.left.position[2] = -0.71;
        let report = validate_state(&state, &bounds);
        assert_eq!(report.len(), 1);
        assert_eq!(report.violations[0].path, "left.position.z");
        assert_eq!(report.violations[0].kind, ViolationKind::Workspace);
        // the bound itself is inside
        state.left.position[2] = -0.70;
        assert!(validate_state(&state, &bounds).is_valid());
    }

    #[test]
    fn clamp_saturates_fingers_and_leaves_valid_values() {
        let mut state = interior_state();
        state.left.fingers[1] = 1.3;
        let clamped = clamp_state(&state, &WorkspaceBounds::default());
        assert_eq!(clamped.left.fingers[1], 1.0);
        assert_eq!(clamped.left.fingers[0], 0.5);
        assert_eq!(clamp_state(&interior_state(), &WorkspaceBounds::default()), interior_state());
    }

    #[test]
    fn clamp_wraps_angles() {
        let mut state = interior_state();
        state.right.orientation[2] = 3.5;
        let clamped = clamp_state(&state, &WorkspaceBounds::default());
        // independent route: subtract whole turns by hand
        let expected = 3.5 - 2.0 * std::f64::consts::PI;
        assert!((clamped.right.orientation[2] - expected).abs() < 1e-12);
        assert!((clamped.right.orientation[2] - (-2.7832)).abs() < 1e-4);
    }

    #[test]
    fn wrap_angle_edges() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert_eq!(wrap_angle(PI + 5e-7), PI);
        assert!((wrap_angle(7.0 * PI) - (-PI)).abs() < 1e-12 || (wrap_angle(7.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-4.0) - (TAU - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn clamp_handles_non_finite() {
        let mut state = interior_state();
        state.left.position[0] = f64::NAN;
        state.left.position[1] = f64::INFINITY;
        state.left.orientation[0] = f64::NEG_INFINITY;
        state.right.fingers[3] = f64::NAN;
        let bounds = WorkspaceBounds::default();
        assert_eq!(validate_state(&state, &bounds).len(), 4);
        let clamped = clamp_state(&state, &bounds);
        assert!(validate_state(&clamped, &bounds).is_valid());
        assert_eq!(clamped.left.position[1], bounds.max[1]);
    }

    #[test]
    fn sequence_constructor_checks() {
        assert_eq!(MotionSequence::new(vec![], 0.5), Err(SequenceError::Empty));
        assert!(matches!(
            MotionSequence::new(vec![MotionState::zeros()], 0.0),
            Err(SequenceError::InvalidKeyframeDt(_))
        ));
        let seq = MotionSequence::constant(interior_state(), 10, 0.5).unwrap();
        assert_eq!(seq.len(), 10);
        assert!((seq.duration() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn sequence_serde_rejects_bad_dt() {
        let json = r#"{"keyframe_dt": -1.0, "states": []}"#;
        assert!(serde_json::from_str::<MotionSequence>(json).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn any_state() -> impl Strategy<Value = MotionState> {
            proptest::array::uniform22(-10.0f64..10.0).prop_map(|v| MotionState::from_array(&v))
        }

        proptest! {
            #[test]
            fn clamp_is_idempotent(state in any_state()) {
                let bounds = WorkspaceBounds::default();
                let once = clamp_state(&state, &bounds);
                prop_assert_eq!(clamp_state(&once, &bounds), once);
            }

            #[test]
            fn clamped_states_validate(state in any_state()) {
                let bounds = WorkspaceBounds::default();
                prop_assert!(validate_state(&clamp_state(&state, &bounds), &bounds).is_valid());
            }
        }
    }
}
