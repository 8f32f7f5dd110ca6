//! Dense, uniformly sampled trajectories built from keyframe sequences.
//!
//! Positions use cubic Hermite segments with Catmull-Rom tangents (one-sided
//! differences at the ends), orientations slerp along the shortest arc
//! between hemisphere-aligned keyframe quaternions, and fingers interpolate
//! linearly. Samples that land on a keyframe instant reproduce the keyframe
//! exactly.

mod export;
mod feasibility;
mod metrics;

pub use export::{read_columnar, write_columnar, ColumnarError};
pub use feasibility::{check_trajectory, FailurePoint, FeasibilityReport};
pub use metrics::{compute_metrics, HandMetrics, MetricsError, MotionMetrics, SYMMETRY_SCALE};

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::motion::{HandState, MotionSequence, MotionState, Side, WorkspaceBounds};

/// Lowest accepted sample rate, Hz.
pub const MIN_RATE: f64 = 10.0;
/// Default sample rate, Hz.
pub const DEFAULT_RATE: f64 = 50.0;
/// Default per-hand speed cap for [`limit_speed`], m/s.
pub const DEFAULT_SPEED_CAP: f64 = 1.5;

/// Distance (in keyframe units) within which a sample snaps to a keyframe.
const KEYFRAME_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("sample rate {0} Hz is below the {MIN_RATE} Hz minimum")]
    RateTooLow(f64),
    #[error("speed scale must be positive and finite, got {0}")]
    InvalidSpeedScale(f64),
    #[error("speed cap must be positive and finite, got {0}")]
    InvalidSpeedCap(f64),
}

/// Uniformly sampled reference trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTrajectory {
    /// Hz; samples are `1 / rate` apart.
    pub rate: f64,
    /// Seconds.
    pub duration: f64,
    pub samples: Vec<MotionState>,
    /// Source keyframes.
    #[serde(default)]
    pub keyframes: Vec<MotionState>,
    /// Time of each source keyframe, seconds.
    pub keyframe_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityReport>,
}

impl DenseTrajectory {
    pub fn sample_dt(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |k| k as f64 / self.rate)
    }

    /// Sample indices that coincide with a keyframe instant, per keyframe.
    pub fn keyframe_sample_indices(&self) -> Vec<Option<usize>> {
        self.keyframe_times
            .iter()
            .map(|t| {
                let k = (t * self.rate).round();
                ((t * self.rate - k).abs() < 1e-6 && (k as usize) < self.samples.len())
                    .then_some(k as usize)
            })
            .collect()
    }

    pub fn with_feasibility(mut self, report: FeasibilityReport) -> Self {
        self.feasibility = Some(report);
        self
    }

    /// Same samples played `speed_scale` times faster.
    pub fn retime(&self, speed_scale: f64) -> Result<Self, TrajectoryError> {
        check_scale(speed_scale)?;
        Ok(Self {
            rate: self.rate * speed_scale,
            duration: self.duration / speed_scale,
            samples: self.samples.clone(),
            keyframes: self.keyframes.clone(),
            keyframe_times: self.keyframe_times.iter().map(|t| t / speed_scale).collect(),
            feasibility: self.feasibility.clone(),
        })
    }
}

fn check_scale(speed_scale: f64) -> Result<(), TrajectoryError> {
    if speed_scale.is_finite() && speed_scale > 0.0 {
        Ok(())
    } else {
        Err(TrajectoryError::InvalidSpeedScale(speed_scale))
    }
}

/// Keyframe spacing divided by `speed_scale`; geometry is untouched.
pub fn retime_sequence(seq: &MotionSequence, speed_scale: f64) -> Result<MotionSequence, TrajectoryError> {
    check_scale(speed_scale)?;
    Ok(seq
        .with_keyframe_dt(seq.keyframe_dt() / speed_scale)
        .expect("positive spacing stays positive"))
}

pub(crate) fn to_quaternion(rpy: &[f64; 3]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2])
}

pub(crate) fn to_euler(q: &UnitQuaternion<f64>) -> [f64; 3] {
    let (r, p, y) = q.euler_angles();
    [r, p, y]
}

/// Spherical interpolation from `a` to `b`. Takes the arc through `b` as
/// given; callers align hemispheres first for the shortest arc.
pub(crate) fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, s: f64) -> UnitQuaternion<f64> {
    let (qa, qb) = (a.coords, b.coords);
    let dot = qa.dot(&qb).clamp(-1.0, 1.0);
    let coords = if dot > 1.0 - 1e-12 {
        qa * (1.0 - s) + qb * s
    } else {
        let theta = dot.acos();
        let sin = theta.sin();
        qa * (((1.0 - s) * theta).sin() / sin) + qb * ((s * theta).sin() / sin)
    };
    UnitQuaternion::from_quaternion(Quaternion::from(coords))
}

/// Keyframe quaternions with each one flipped into the hemisphere of its
/// predecessor.
fn aligned_quaternions(seq: &MotionSequence, side: Side) -> Vec<UnitQuaternion<f64>> {
    let mut out: Vec<UnitQuaternion<f64>> = Vec::with_capacity(seq.len());
    for state in seq.states() {
        let mut q = to_quaternion(&state.hand(side).orientation);
        if let Some(prev) = out.last() {
            if prev.coords.dot(&q.coords) < 0.0 {
                q = UnitQuaternion::new_unchecked(-q.into_inner());
            }
        }
        out.push(q);
    }
    out
}

fn tangents(points: &[[f64; 3]], dt: f64) -> Vec<[f64; 3]> {
    let n = points.len();
    (0..n)
        .map(|j| {
            let (a, b, span) = match (j, n) {
                (_, 1) => return [0.0; 3],
                (0, _) => (0, 1, dt),
                (j, n) if j == n - 1 => (n - 2, n - 1, dt),
                (j, _) => (j - 1, j + 1, 2.0 * dt),
            };
            [0, 1, 2].map(|i| (points[b][i] - points[a][i]) / span)
        })
        .collect()
}

fn hermite(p0: &[f64; 3], m0: &[f64; 3], p1: &[f64; 3], m1: &[f64; 3], dt: f64, s: f64) -> [f64; 3] {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    [0, 1, 2].map(|i| h00 * p0[i] + h10 * dt * m0[i] + h01 * p1[i] + h11 * dt * m1[i])
}

/// Precomputed per-hand interpolation data.
struct HandChannel {
    positions: Vec<[f64; 3]>,
    tangents: Vec<[f64; 3]>,
    quats: Vec<UnitQuaternion<f64>>,
    fingers: Vec<[f64; 5]>,
}

impl HandChannel {
    fn new(seq: &MotionSequence, side: Side) -> Self {
        let positions: Vec<[f64; 3]> = seq.states().iter().map(|s| s.hand(side).position).collect();
        Self {
            tangents: tangents(&positions, seq.keyframe_dt()),
            positions,
            quats: aligned_quaternions(seq, side),
            fingers: seq.states().iter().map(|s| s.hand(side).fingers).collect(),
        }
    }

    fn eval(&self, segment: usize, s: f64, dt: f64, bounds: &WorkspaceBounds) -> HandState {
        let (j, k) = (segment, segment + 1);
        let mut position = hermite(
            &self.positions[j],
            &self.tangents[j],
            &self.positions[k],
            &self.tangents[k],
            dt,
            s,
        );
        for i in 0..3 {
            position[i] = position[i].clamp(bounds.min[i], bounds.max[i]);
        }
        let orientation = to_euler(&slerp(&self.quats[j], &self.quats[k], s));
        let fingers = [0, 1, 2, 3, 4]
            .map(|i| ((1.0 - s) * self.fingers[j][i] + s * self.fingers[k][i]).clamp(0.0, 1.0));
        HandState::new(position, orientation, fingers)
    }
}

/// Resamples `seq` at `rate` Hz. Interpolated positions are clamped to
/// `bounds` so Hermite overshoot never leaves the workspace.
pub fn interpolate_within(
    seq: &MotionSequence,
    rate: f64,
    bounds: &WorkspaceBounds,
) -> Result<DenseTrajectory, TrajectoryError> {
    if !(rate >= MIN_RATE && rate.is_finite()) {
        return Err(TrajectoryError::RateTooLow(rate));
    }
    let dt = seq.keyframe_dt();
    let duration = seq.duration();
    let count = (duration * rate + 1e-9).floor() as usize + 1;
    let left = HandChannel::new(seq, Side::Left);
    let right = HandChannel::new(seq, Side::Right);
    let last = seq.len() - 1;

    let samples = (0..count)
        .map(|k| {
            let u = (k as f64 / rate) / dt;
            let nearest = u.round();
            if (u - nearest).abs() < KEYFRAME_SNAP && (nearest as usize) <= last {
                return seq.states()[nearest as usize];
            }
            let segment = (u.floor() as usize).min(last.saturating_sub(1));
            let s = (u - segment as f64).clamp(0.0, 1.0);
            MotionState::new(
                left.eval(segment, s, dt, bounds),
                right.eval(segment, s, dt, bounds),
            )
        })
        .collect();

    Ok(DenseTrajectory {
        rate,
        duration,
        samples,
        keyframes: seq.states().to_vec(),
        keyframe_times: (0..seq.len()).map(|j| j as f64 * dt).collect(),
        feasibility: None,
    })
}

/// [`interpolate_within`] using the default workspace bounds.
pub fn interpolate(seq: &MotionSequence, rate: f64) -> Result<DenseTrajectory, TrajectoryError> {
    interpolate_within(seq, rate, &WorkspaceBounds::default())
}

fn lerp3(a: &[f64; 3], b: &[f64; 3], s: f64) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * s)
}

fn blend_states(a: &MotionState, b: &MotionState, s: f64) -> MotionState {
    let hand = |ha: &HandState, hb: &HandState| {
        let qa = to_quaternion(&ha.orientation);
        let mut qb = to_quaternion(&hb.orientation);
        if qa.coords.dot(&qb.coords) < 0.0 {
            qb = UnitQuaternion::new_unchecked(-qb.into_inner());
        }
        HandState::new(
            lerp3(&ha.position, &hb.position, s),
            to_euler(&slerp(&qa, &qb, s)),
            [0, 1, 2, 3, 4].map(|i| ha.fingers[i] + (hb.fingers[i] - ha.fingers[i]) * s),
        )
    };
    MotionState::new(hand(&a.left, &b.left), hand(&a.right, &b.right))
}

/// Stretches the intervals where either hand would exceed `cap` m/s and
/// resamples at the original rate. The path is kept up to linear resampling
/// between neighbouring samples; intervals already under the cap keep their
/// timing. Any feasibility report is dropped because sample indices move.
pub fn limit_speed(traj: &DenseTrajectory, cap: f64) -> Result<DenseTrajectory, TrajectoryError> {
    if !(cap.is_finite() && cap > 0.0) {
        return Err(TrajectoryError::InvalidSpeedCap(cap));
    }
    let h = traj.sample_dt();
    let n = traj.samples.len();
    let mut times = Vec::with_capacity(n);
    times.push(0.0);
    let mut stretched = false;
    for w in traj.samples.windows(2) {
        let step = Side::BOTH
            .iter()
            .map(|&side| {
                let (a, b) = (w[0].hand(side).position, w[1].hand(side).position);
                ((0..3).map(|i| (b[i] - a[i]).powi(2)).sum::<f64>()).sqrt()
            })
            .fold(0.0, f64::max);
        let dt = if step / h > cap {
            stretched = true;
            step / cap
        } else {
            h
        };
        times.push(times.last().unwrap() + dt);
    }
    if !stretched {
        return Ok(traj.clone());
    }

    // round up so the final sample lands on the end state
    let count = (*times.last().unwrap() * traj.rate - 1e-9).ceil() as usize + 1;
    let duration = (count - 1) as f64 / traj.rate;
    let mut samples = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let t = k as f64 / traj.rate;
        while seg + 2 < n && times[seg + 1] <= t {
            seg += 1;
        }
        let span = times[seg + 1] - times[seg];
        let s = ((t - times[seg]) / span).clamp(0.0, 1.0);
        samples.push(blend_states(&traj.samples[seg], &traj.samples[seg + 1], s));
    }
    let map_time = |t: f64| {
        let idx = (t * traj.rate).round() as usize;
        times[idx.min(n - 1)]
    };
    Ok(DenseTrajectory {
        rate: traj.rate,
        duration,
        samples,
        keyframes: traj.keyframes.clone(),
        keyframe_times: traj.keyframe_times.iter().map(|&t| map_time(t)).collect(),
        feasibility: None,
    })
}
