//! Denavit-Hartenberg evaluator on plain arrays with the published UR5 and Panda
//! parameters typed in by hand. Shares no code with the library.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

pub type Mat4 = [[f64; 4]; 4];

/// `(a, alpha, d)` per joint.
pub const UR5: [(f64, f64, f64); 6] = [
    (0.0, FRAC_PI_2, 0.089159),
    (-0.425, 0.0, 0.0),
    (-0.39225, 0.0, 0.0),
    (0.0, FRAC_PI_2, 0.10915),
    (0.0, -FRAC_PI_2, 0.09465),
    (0.0, 0.0, 0.0823),
];
pub const UR5_TCP: f64 = 0.1034;

/// `(a, alpha, d)` per joint, `a` and `alpha` of the preceding link.
pub const PANDA: [(f64, f64, f64); 7] = [
    (0.0, 0.0, 0.333),
    (0.0, -FRAC_PI_2, 0.0),
    (0.0, FRAC_PI_2, 0.316),
    (0.0825, FRAC_PI_2, 0.0),
    (-0.0825, -FRAC_PI_2, 0.384),
    (0.0, FRAC_PI_2, 0.0),
    (0.088, FRAC_PI_2, 0.0),
];
/// Flange 0.107 plus hand TCP 0.1034, hand turned by -pi/4.
pub const PANDA_TCP: f64 = 0.2104;
pub const PANDA_HAND_YAW: f64 = -FRAC_PI_4;

fn identity() -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn rot_x(t: f64) -> Mat4 {
    let (s, c) = t.sin_cos();
    [[1.0, 0.0, 0.0, 0.0], [0.0, c, -s, 0.0], [0.0, s, c, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

fn rot_z(t: f64) -> Mat4 {
    let (s, c) = t.sin_cos();
    [[c, -s, 0.0, 0.0], [s, c, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

fn trans(x: f64, y: f64, z: f64) -> Mat4 {
    let mut m = identity();
    m[0][3] = x;
    m[1][3] = y;
    m[2][3] = z;
    m
}

pub fn ur5_fk(q: &[f64]) -> Mat4 {
    assert_eq!(q.len(), 6);
    let mut t = identity();
    for (&(a, alpha, d), &qi) in UR5.iter().zip(q) {
        t = mul(&t, &rot_z(qi));
        t = mul(&t, &trans(a, 0.0, d));
        t = mul(&t, &rot_x(alpha));
    }
    mul(&t, &trans(0.0, 0.0, UR5_TCP))
}

pub fn panda_fk(q: &[f64]) -> Mat4 {
    assert_eq!(q.len(), 7);
    let mut t = identity();
    for (&(a, alpha, d), &qi) in PANDA.iter().zip(q) {
        t = mul(&t, &rot_x(alpha));
        t = mul(&t, &trans(a, 0.0, 0.0));
        t = mul(&t, &rot_z(qi));
        t = mul(&t, &trans(0.0, 0.0, d));
    }
    t = mul(&t, &trans(0.0, 0.0, PANDA_TCP));
    mul(&t, &rot_z(PANDA_HAND_YAW))
}

pub fn position(m: &Mat4) -> [f64; 3] {
    [m[0][3], m[1][3], m[2][3]]
}

pub fn position_distance(a: &Mat4, b: &Mat4) -> f64 {
    (0..3).map(|i| (a[i][3] - b[i][3]).powi(2)).sum::<f64>().sqrt()
}

/// Angle of `a^T b`, accurate for small angles.
pub fn rotation_distance(a: &Mat4, b: &Mat4) -> f64 {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| a[k][i] * b[k][j]).sum();
        }
    }
    let v = [r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]];
    let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() / 2.0;
    let c = (r[0][0] + r[1][1] + r[2][2] - 1.0) / 2.0;
    s.atan2(c)
}

/// Rotation vector of `b a^T` (world frame), for finite differences.
pub fn rotation_vector_between(a: &Mat4, b: &Mat4) -> [f64; 3] {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| b[i][k] * a[j][k]).sum();
        }
    }
    let v = [r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]];
    let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() / 2.0;
    let c = (r[0][0] + r[1][1] + r[2][2] - 1.0) / 2.0;
    let angle = s.atan2(c);
    let k = if s < 1e-15 { 0.5 } else { angle / (2.0 * s) };
    [v[0] * k, v[1] * k, v[2] * k]
}
