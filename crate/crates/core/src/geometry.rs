//! Rigid-body transform algebra.
//!
//! Poses follow the column-vector convention: `a.compose(&b)` is the matrix
//! product `T_a · T_b`, i.e. it applies `b` first. A pose named `T_A_B` is
//! frame `B` expressed in frame `A`, so `T_A_B.transform_point(p_B)` yields
//! the same point in `A` coordinates.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use std::ops::Mul;

use crate::{Error, Result};

/// Unit quaternion stored as `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quaternion {
    /// Builds a quaternion from raw components and normalizes it.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }.normalized()
    }

    pub const fn identity() -> Self {
        Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 }
    }

    pub fn from_array(wxyz: [f64; 4]) -> Self {
        Self::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Returns the unit quaternion. Already-unit inputs are returned
    /// bit-for-bit unchanged so repeated normalization is idempotent.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if (n - 1.0).abs() <= f64::EPSILON || n == 0.0 {
            return self;
        }
        Self { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn conjugate(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Inverse of a unit quaternion.
    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn neg(&self) -> Self {
        Self { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Representative with `w >= 0`.
    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            self.neg()
        } else {
            self
        }
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let a = axis / n;
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, a.x * s, a.y * s, a.z * s)
    }

    /// Exponential map from a rotation vector (axis times angle).
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        let angle = v.norm();
        if angle == 0.0 {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let k = s / angle;
        Self::new(c, v.x * k, v.y * k, v.z * k)
    }

    /// Logarithm map onto the shortest rotation vector, angle in `[0, π]`.
    pub fn to_rotation_vector(&self) -> Vector3<f64> {
        let q = self.canonical();
        let v = Vector3::new(q.x, q.y, q.z);
        let vn = v.norm();
        if vn == 0.0 {
            return Vector3::zeros();
        }
        let angle = 2.0 * vn.atan2(q.w);
        v * (angle / vn)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let vn = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        2.0 * vn.atan2(self.w.abs())
    }

    /// Angle of the relative rotation `self⁻¹ · other`.
    pub fn angle_to(&self, other: &Self) -> f64 {
        (self.inverse() * *other).angle()
    }

    /// Rotation equality: `q` and `-q` compare equal.
    pub fn rotation_eq(&self, other: &Self, tol: f64) -> bool {
        self.angle_to(other) <= tol
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Shepperd's method; the input should be a proper rotation matrix.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if trace > 0.0 {
            let s = 2.0 * (trace + 1.0).sqrt();
            Self {
                w: 0.25 * s,
                x: (m[(2, 1)] - m[(1, 2)]) / s,
                y: (m[(0, 2)] - m[(2, 0)]) / s,
                z: (m[(1, 0)] - m[(0, 1)]) / s,
            }
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
            Self {
                w: (m[(2, 1)] - m[(1, 2)]) / s,
                x: 0.25 * s,
                y: (m[(0, 1)] + m[(1, 0)]) / s,
                z: (m[(0, 2)] + m[(2, 0)]) / s,
            }
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
            Self {
                w: (m[(0, 2)] - m[(2, 0)]) / s,
                x: (m[(0, 1)] + m[(1, 0)]) / s,
                y: 0.25 * s,
                z: (m[(1, 2)] + m[(2, 1)]) / s,
            }
        } else {
            let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
            Self {
                w: (m[(1, 0)] - m[(0, 1)]) / s,
                x: (m[(0, 2)] + m[(2, 0)]) / s,
                y: (m[(1, 2)] + m[(2, 1)]) / s,
                z: 0.25 * s,
            }
        };
        q.normalized().canonical()
    }

    /// Spherical interpolation along the shortest arc; `s = 0` returns `self`.
    pub fn slerp(&self, other: &Self, s: f64) -> Self {
        let delta = self.inverse() * *other;
        *self * Self::from_rotation_vector(&(delta.to_rotation_vector() * s))
    }

    /// Intrinsic Z-Y-X (yaw, pitch, roll) composition `Rz(yaw)·Ry(pitch)·Rx(roll)`.
    pub fn from_euler(e: &EulerAngles) -> Self {
        let (sr, cr) = (0.5 * e.roll).sin_cos();
        let (sp, cp) = (0.5 * e.pitch).sin_cos();
        let (sy, cy) = (0.5 * e.yaw).sin_cos();
        Self::new(
            cy * cp * cr + sy * sp * sr,
            cy * cp * sr - sy * sp * cr,
            cy * sp * cr + sy * cp * sr,
            sy * cp * cr - cy * sp * sr,
        )
    }

    pub fn to_euler(&self) -> EulerAngles {
        let m = self.to_matrix();
        let pitch = (-m[(2, 0)]).atan2((m[(0, 0)] * m[(0, 0)] + m[(1, 0)] * m[(1, 0)]).sqrt());
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        EulerAngles { roll, pitch, yaw }
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            x: self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            y: self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            z: self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        }
        .normalized()
    }
}

/// Intrinsic Z-Y-X Euler angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    /// `[yaw, pitch, roll]`, the order used for binning and reporting.
    pub fn ypr(&self) -> [f64; 3] {
        [self.yaw, self.pitch, self.roll]
    }

    pub fn from_ypr(ypr: [f64; 3]) -> Self {
        Self { yaw: ypr[0], pitch: ypr[1], roll: ypr[2] }
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a % TAU;
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

/// Rigid transform: rotation followed by translation (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Quaternion,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Quaternion, translation: Vector3<f64>) -> Self {
        Self { rotation: rotation.normalized(), translation }
    }

    pub fn identity() -> Self {
        Self { rotation: Quaternion::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self { rotation: Quaternion::identity(), translation: Vector3::new(x, y, z) }
    }

    pub fn from_rotation(rotation: Quaternion) -> Self {
        Self { rotation, translation: Vector3::zeros() }
    }

    /// `self · other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let r = self.rotation.inverse();
        Pose { rotation: r, translation: -r.rotate(&self.translation) }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation.to_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Pose {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        Pose {
            rotation: Quaternion::from_matrix(&r),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    /// Rotation angle (rad) and translation distance (m) between two poses.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        (
            self.rotation.angle_to(&other.rotation),
            (self.translation - other.translation).norm(),
        )
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

/// Synchronized tip pose in the left-camera frame:
/// `T_Cam_CT = (T_H_Cam)⁻¹ · (T_V_H)⁻¹ · T_V_CB · T_CB_CT`.
///
/// `cam_in_headset` is the hand-eye result (camera in the headset
/// constellation frame), `headset_in_vicon` and `back_in_vicon` are the
/// mocap poses of the two constellations, and `tip_in_back` is the
/// calibrated tip offset.
pub fn tip_pose_in_camera(
    cam_in_headset: &Pose,
    headset_in_vicon: &Pose,
    back_in_vicon: &Pose,
    tip_in_back: &Pose,
) -> Pose {
    cam_in_headset
        .inverse()
        .compose(&headset_in_vicon.inverse())
        .compose(back_in_vicon)
        .compose(tip_in_back)
}

/// Rigid offset from the back constellation to the tip, from simultaneous
/// mocap observations of both: `T_CB_CT = (T_V_CB)⁻¹ · T_V_CT`.
pub fn tip_offset(back_in_vicon: &Pose, tip_in_vicon: &Pose) -> Pose {
    back_in_vicon.inverse().compose(tip_in_vicon)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose,
}

/// Pose samples with strictly increasing timestamps (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct TimedTrajectory {
    samples: Vec<TimedPose>,
    rate_hz: f64,
}

impl TimedTrajectory {
    pub fn new(samples: Vec<TimedPose>, rate_hz: f64) -> Result<Self> {
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::NonMonotonicTimestamps(i + 1));
        }
        Ok(Self { samples, rate_hz })
    }

    pub fn samples(&self) -> &[TimedPose] {
        &self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }

    pub fn end(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// Same samples with every timestamp shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| TimedPose { t: s.t + dt, pose: s.pose }).collect(),
            rate_hz: self.rate_hz,
        }
    }

    /// Time-reversed copy: sample order flipped and `t ↦ t_first + t_last − t`.
    pub fn reversed(&self) -> Self {
        let (a, b) = match (self.start(), self.end()) {
            (Some(a), Some(b)) => (a, b),
            _ => return self.clone(),
        };
        Self {
            samples: self.samples.iter().rev().map(|s| TimedPose { t: a + b - s.t, pose: s.pose }).collect(),
            rate_hz: self.rate_hz,
        }
    }

    /// Index of the sample nearest in time to `t` (ties go to the earlier sample).
    pub fn nearest_index(&self, t: f64) -> Option<usize> {
        if self.samples.is_empty() {
            return None;
        }
        let i = self.samples.partition_point(|s| s.t < t);
        if i == 0 {
            return Some(0);
        }
        if i == self.samples.len() {
            return Some(i - 1);
        }
        let before = t - self.samples[i - 1].t;
        let after = self.samples[i].t - t;
        Some(if after < before { i } else { i - 1 })
    }

    /// Pose at time `t`: linear in translation, slerp in rotation.
    pub fn interpolate(&self, t: f64) -> Result<Pose> {
        let (start, end) = match (self.start(), self.end()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::TrajectoryTooShort),
        };
        if !(t >= start && t <= end) {
            return Err(Error::ExtrapolationRefused { t, start, end });
        }
        let i = self.samples.partition_point(|s| s.t < t);
        let hi = &self.samples[i];
        if hi.t == t {
            return Ok(hi.pose);
        }
        let lo = &self.samples[i - 1];
        let s = (t - lo.t) / (hi.t - lo.t);
        Ok(Pose {
            rotation: lo.pose.rotation.slerp(&hi.pose.rotation, s),
            translation: lo.pose.translation + (hi.pose.translation - lo.pose.translation) * s,
        })
    }

    /// Body-frame angular velocity by central differences,
    /// `ω_i = log(q_{i-1}⁻¹ q_{i+1}) / (t_{i+1} − t_{i-1})`,
    /// with one-sided differences at both ends.
    pub fn angular_velocity(&self) -> Result<Vec<(f64, Vector3<f64>)>> {
        let s = &self.samples;
        let n = s.len();
        if n < 2 {
            return Err(Error::TrajectoryTooShort);
        }
        let rate = |a: &TimedPose, b: &TimedPose| {
            (a.pose.rotation.inverse() * b.pose.rotation).to_rotation_vector() / (b.t - a.t)
        };
        Ok((0..n)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(n - 1);
                (s[i].t, rate(&s[lo], &s[hi]))
            })
            .collect())
    }
}
