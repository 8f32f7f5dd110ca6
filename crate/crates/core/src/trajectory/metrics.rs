//! Motion-quality measures: hand height, path length, jerk, speed, and
//! left/right mirror symmetry. Derivatives use finite differences at the
//! sample rate.

use serde::{Deserialize, Serialize};

use super::DenseTrajectory;
use crate::motion::Side;

/// RMS mirror distance at which symmetry reaches zero, meters.
pub const SYMMETRY_SCALE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("metrics need at least 4 samples, got {0}")]
    TooFewSamples(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandMetrics {
    /// Mean z, meters.
    pub mean_hand_height: f64,
    /// Meters.
    pub path_length: f64,
    /// RMS norm of the position third derivative, m/s^3.
    pub jerk_rms: f64,
    /// m/s.
    pub peak_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionMetrics {
    pub left: HandMetrics,
    pub right: HandMetrics,
    /// 1 = the right hand mirrors the left exactly; 0 = RMS mismatch of
    /// [`SYMMETRY_SCALE`] or more.
    pub bilateral_symmetry: f64,
}

impl MotionMetrics {
    pub fn hand(&self, side: Side) -> &HandMetrics {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// Mean of the two hands' mean heights.
    pub fn mean_hand_height(&self) -> f64 {
        0.5 * (self.left.mean_hand_height + self.right.mean_hand_height)
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn hand_metrics(points: &[[f64; 3]], h: f64) -> HandMetrics {
    let n = points.len();
    let mean_hand_height = points.iter().map(|p| p[2]).sum::<f64>() / n as f64;
    let path_length = points.windows(2).map(|w| norm(sub(&w[1], &w[0]))).sum();

    let speed = |k: usize| {
        let (a, b, span) = if k == 0 {
            (0, 1, h)
        } else if k == n - 1 {
            (n - 2, n - 1, h)
        } else {
            (k - 1, k + 1, 2.0 * h)
        };
        norm(sub(&points[b], &points[a])) / span
    };
    let peak_speed = (0..n).map(speed).fold(0.0, f64::max);

    let h3 = h * h * h;
    let jerks: Vec<f64> = if n >= 5 {
        (2..n - 2)
            .map(|k| {
                let j = [0, 1, 2].map(|i| {
                    (points[k + 2][i] - 2.0 * points[k + 1][i] + 2.0 * points[k - 1][i]
                        - points[k - 2][i])
                        / (2.0 * h3)
                });
                norm(j)
            })
            .collect()
    } else {
        let j = [0, 1, 2].map(|i| {
            (points[3][i] - 3.0 * points[2][i] + 3.0 * points[1][i] - points[0][i]) / h3
        });
        vec![norm(j)]
    };
    let jerk_rms = (jerks.iter().map(|j| j * j).sum::<f64>() / jerks.len() as f64).sqrt();

    HandMetrics {
        mean_hand_height,
        path_length,
        jerk_rms,
        peak_speed,
    }
}

/// Compares the left hand with the right hand mirrored through the
/// sagittal plane `y = 0`.
fn symmetry(left: &[[f64; 3]], right: &[[f64; 3]]) -> f64 {
    let n = left.len() as f64;
    let mean_sq = left
        .iter()
        .zip(right)
        .map(|(l, r)| {
            let mirrored = [r[0], -r[1], r[2]];
            let d = norm(sub(l, &mirrored));
            d * d
        })
        .sum::<f64>()
        / n;
    (1.0 - mean_sq.sqrt() / SYMMETRY_SCALE).clamp(0.0, 1.0)
}

pub fn compute_metrics(traj: &DenseTrajectory) -> Result<MotionMetrics, MetricsError> {
    let n = traj.samples.len();
    if n < 4 {
        return Err(MetricsError::TooFewSamples(n));
    }
    let h = traj.sample_dt();
    let left: Vec<[f64; 3]> = traj.samples.iter().map(|s| s.left.position).collect();
    let right: Vec<[f64; 3]> = traj.samples.iter().map(|s| s.right.position).collect();
    Ok(MotionMetrics {
        left: hand_metrics(&left, h),
        right: hand_metrics(&right, h),
        bilateral_symmetry: symmetry(&left, &right),
    })
}
