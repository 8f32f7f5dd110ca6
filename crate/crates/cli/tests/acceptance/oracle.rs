//! Reference forward kinematics built from explicit 4x4 homogeneous
//! transforms. Shares only the link geometry with the library.

pub type M4 = [[f64; 4]; 4];

pub fn identity() -> M4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mul(a: &M4, b: &M4) -> M4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn trans(x: f64, y: f64, z: f64) -> M4 {
    [
        [1.0, 0.0, 0.0, x],
        [0.0, 1.0, 0.0, y],
        [0.0, 0.0, 1.0, z],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

pub fn rot_x(a: f64) -> M4 {
    let (s, c) = a.sin_cos();
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c, -s, 0.0],
        [0.0, s, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

pub fn rot_y(a: f64) -> M4 {
    let (s, c) = a.sin_cos();
    [
        [c, 0.0, s, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [-s, 0.0, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

pub fn rot_z(a: f64) -> M4 {
    let (s, c) = a.sin_cos();
    [
        [c, -s, 0.0, 0.0],
        [s, c, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// `[roll, pitch, yaw]`, intrinsic Z-Y-X: Rz(yaw) Ry(pitch) Rx(roll).
pub fn euler(rpy: [f64; 3]) -> M4 {
    mul(&mul(&rot_z(rpy[2]), &rot_y(rpy[1])), &rot_x(rpy[0]))
}

pub struct Arm {
    pub shoulder: [f64; 3],
    pub upper: f64,
    pub fore: f64,
    pub hand: f64,
    /// +1 left, -1 right.
    pub m: f64,
}

/// Torso-from-hand transform. Joints: shoulder pitch about -y, roll about
/// m*x, yaw about m*z, elbow about -y, wrist roll about m*z, wrist pitch
/// about -y, wrist yaw about m*x. Links hang along -z. The hand frame has x
/// along the fingers and z out of the back of the hand.
pub fn fk(arm: &Arm, q: &[f64; 7]) -> M4 {
    let m = arm.m;
    let mount: M4 = [
        [0.0, -m, 0.0, 0.0],
        [0.0, 0.0, m, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let steps = [
        trans(arm.shoulder[0], arm.shoulder[1], arm.shoulder[2]),
        rot_y(-q[0]),
        rot_x(m * q[1]),
        rot_z(m * q[2]),
        trans(0.0, 0.0, -arm.upper),
        rot_y(-q[3]),
        trans(0.0, 0.0, -arm.fore),
        rot_z(m * q[4]),
        rot_y(-q[5]),
        rot_x(m * q[6]),
        trans(0.0, 0.0, -arm.hand),
        mount,
    ];
    steps.iter().fold(identity(), |acc, s| mul(&acc, s))
}

pub fn position(t: &M4) -> [f64; 3] {
    [t[0][3], t[1][3], t[2][3]]
}

/// Largest element-wise difference of the rotation blocks.
pub fn rotation_diff(a: &M4, b: &M4) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((a[i][j] - b[i][j]).abs());
        }
    }
    worst
}

/// Geodesic angle between the rotation blocks, radians.
pub fn rotation_angle(a: &M4, b: &M4) -> f64 {
    // trace(A^T B)
    let mut tr = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            tr += a[j][i] * b[j][i];
        }
    }
    ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}
