//! Offline calibration: hand-eye (AX = XB), tip offset, and clock alignment
//! between the mocap and camera streams.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::geometry::{tip_offset, Pose, Quaternion, TimedTrajectory};
use crate::{Error, Result};

/// Hand-eye solution with residual statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandEyeResult {
    /// Camera pose in the headset-constellation frame.
    pub x: Pose,
    pub rotation_rmse: f64,
    pub translation_rmse: f64,
    pub n_pairs: usize,
}

/// Clock offset between two streams: `t_mocap = t_camera + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAlignment {
    pub offset: f64,
    pub correlation_peak: f64,
}

const MIN_ROTATION: f64 = 1e-6;

fn left_mat(q: &Quaternion) -> Matrix4<f64> {
    Matrix4::new(
        q.w, -q.x, -q.y, -q.z, //
        q.x, q.w, -q.z, q.y, //
        q.y, q.z, q.w, -q.x, //
        q.z, -q.y, q.x, q.w,
    )
}

fn right_mat(q: &Quaternion) -> Matrix4<f64> {
    Matrix4::new(
        q.w, -q.x, -q.y, -q.z, //
        q.x, q.w, q.z, -q.y, //
        q.y, -q.z, q.w, q.x, //
        q.z, q.y, -q.x, q.w,
    )
}

fn eigenvector(m: Matrix4<f64>, largest: bool) -> Vector4<f64> {
    let eig = SymmetricEigen::new(m);
    let mut best = 0;
    for i in 1..4 {
        let better = if largest {
            eig.eigenvalues[i] > eig.eigenvalues[best]
        } else {
            eig.eigenvalues[i] < eig.eigenvalues[best]
        };
        if better {
            best = i;
        }
    }
    eig.eigenvectors.column(best).into_owned()
}

fn rotation_axis(q: &Quaternion) -> Option<Vector3<f64>> {
    let v = q.canonical().to_rotation_vector();
    let angle = v.norm();
    (angle > MIN_ROTATION).then(|| v / angle)
}

/// Solves `A_i X = X B_i` for `X` from paired relative motions.
///
/// `A_i` is the relative motion of the headset constellation and `B_i` the
/// relative motion of the camera over the same interval. Rotation is solved
/// first from the stacked quaternion constraints `(L(q_A) − R(q_B)) q_X = 0`,
/// then translation from `(R_A − I) t_X = R_X t_B − t_A` by linear least squares.
pub fn hand_eye_solve(pairs: &[(Pose, Pose)]) -> Result<HandEyeResult> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientMotions(pairs.len()));
    }
    let axes: Vec<Vector3<f64>> = pairs.iter().filter_map(|(a, _)| rotation_axis(&a.rotation)).collect();
    let spans_two_axes = axes
        .iter()
        .enumerate()
        .any(|(i, a)| axes[i + 1..].iter().any(|b| a.cross(b).norm() > MIN_ROTATION));
    if !spans_two_axes {
        return Err(Error::DegenerateMotionSet);
    }

    let mut acc = Matrix4::zeros();
    for (a, b) in pairs {
        let m = left_mat(&a.rotation.canonical()) - right_mat(&b.rotation.canonical());
        acc += m.transpose() * m;
    }
    let v = eigenvector(acc, false);
    let qx = Quaternion::new(v[0], v[1], v[2], v[3]).canonical();
    let rx = qx.to_matrix();

    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (a, b) in pairs {
        let c = a.rotation.to_matrix() - Matrix3::identity();
        let d = rx * b.translation - a.translation;
        normal += c.transpose() * c;
        rhs += c.transpose() * d;
    }
    let min_eig = SymmetricEigen::new(normal).eigenvalues.min();
    if !(min_eig > 1e-12 * normal.trace().max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateMotionSet);
    }
    let tx = normal.cholesky().ok_or(Error::DegenerateMotionSet)?.solve(&rhs);
    let x = Pose::new(qx, tx);

    let (mut sr, mut st) = (0.0, 0.0);
    for (a, b) in pairs {
        let (dr, dt) = a.compose(&x).distance(&x.compose(b));
        sr += dr * dr;
        st += dt * dt;
    }
    let n = pairs.len() as f64;
    Ok(HandEyeResult {
        x,
        rotation_rmse: (sr / n).sqrt(),
        translation_rmse: (st / n).sqrt(),
        n_pairs: pairs.len(),
    })
}

/// Relative motion pairs `(A_k, B_k)` from two index-aligned absolute
/// trajectories, one pair per `stride` samples.
pub fn motion_pairs(headset: &[Pose], camera: &[Pose], stride: usize) -> Result<Vec<(Pose, Pose)>> {
    if headset.len() != camera.len() {
        return Err(Error::InvalidInput(format!(
            "trajectory lengths differ: {} vs {}",
            headset.len(),
            camera.len()
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be positive".into()));
    }
    Ok((0..headset.len().saturating_sub(stride))
        .step_by(stride)
        .map(|i| {
            let j = i + stride;
            (
                headset[i].inverse().compose(&headset[j]),
                camera[i].inverse().compose(&camera[j]),
            )
        })
        .collect())
}

/// Average rotation of unit quaternions: dominant eigenvector of `Σ q qᵀ`,
/// sign-invariant in each input.
pub fn average_quaternion(qs: &[Quaternion]) -> Result<Quaternion> {
    let first = *qs.first().ok_or(Error::NoSamples)?;
    // work relative to the first sample so identical inputs average exactly
    let mut acc = Matrix4::zeros();
    for q in qs {
        let d = first.inverse() * *q;
        let v = Vector4::new(d.w, d.x, d.y, d.z);
        acc += v * v.transpose();
    }
    let v = eigenvector(acc, true);
    let mean = Quaternion::new(v[0], v[1], v[2], v[3]).canonical();
    Ok(first * mean)
}

/// Tip offset `T_CB_CT` averaged over simultaneous `(T_V_CB, T_V_CT)` samples.
pub fn tip_calibrate(samples: &[(Pose, Pose)]) -> Result<Pose> {
    let offsets: Vec<Pose> = samples.iter().map(|(cb, ct)| tip_offset(cb, ct)).collect();
    let first = offsets.first().ok_or(Error::NoSamples)?;
    let rotation = average_quaternion(&offsets.iter().map(|p| p.rotation).collect::<Vec<_>>())?;
    let mut delta = Vector3::zeros();
    for p in &offsets {
        delta += p.translation - first.translation;
    }
    let translation = first.translation + delta / offsets.len() as f64;
    Ok(Pose { rotation, translation })
}

/// Options for [`time_align`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAlignOptions {
    pub search_window: f64,
    pub resample_hz: f64,
    pub execution: Execution,
}

impl Default for TimeAlignOptions {
    fn default() -> Self {
        Self { search_window: 0.5, resample_hz: 100.0, execution: Execution::default() }
    }
}

struct Signal {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl Signal {
    fn angular_speed(traj: &TimedTrajectory) -> Result<Self> {
        let w = traj.angular_velocity()?;
        Ok(Self { t: w.iter().map(|(t, _)| *t).collect(), v: w.iter().map(|(_, w)| w.norm()).collect() })
    }

    fn span(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    fn sample(&self, t: f64) -> Option<f64> {
        let (a, b) = self.span();
        if t < a || t > b {
            return None;
        }
        let i = self.t.partition_point(|x| *x < t);
        if self.t[i] == t {
            return Some(self.v[i]);
        }
        let s = (t - self.t[i - 1]) / (self.t[i] - self.t[i - 1]);
        Some(self.v[i - 1] + s * (self.v[i] - self.v[i - 1]))
    }
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    if a.len() < 3 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// Estimates the clock offset between a mocap trajectory and a camera
/// trajectory from their angular-speed profiles.
///
/// The camera speed is resampled onto a uniform grid; the mocap speed is
/// resampled onto the same grid shifted by each candidate lag in
/// `±search_window`. The lag with the highest normalized cross-correlation is
/// refined by a parabola through the peak and its two neighbours.
pub fn time_align(mocap: &TimedTrajectory, camera: &TimedTrajectory, opts: &TimeAlignOptions) -> Result<TimeAlignment> {
    if !(opts.search_window > 0.0 && opts.resample_hz > 0.0) {
        return Err(Error::InvalidConfig("search window and resample rate must be positive".into()));
    }
    let m = Signal::angular_speed(mocap)?;
    let c = Signal::angular_speed(camera)?;
    for (name, s) in [("mocap", &m), ("camera", &c)] {
        let (a, b) = s.span();
        if b - a < 2.0 * opts.search_window {
            return Err(Error::InvalidInput(format!("{name} trajectory shorter than twice the search window")));
        }
    }

    let dt = 1.0 / opts.resample_hz;
    let (c0, c1) = c.span();
    let grid: Vec<f64> = (0..).map(|j| c0 + j as f64 * dt).take_while(|t| *t <= c1).collect();
    let cam_vals: Vec<f64> = grid.iter().map(|t| c.sample(*t).unwrap_or(0.0)).collect();
    if variance(&cam_vals) < 1e-18 || variance(&m.v) < 1e-18 {
        return Err(Error::NoMotionToAlign);
    }

    let correlate = |lag: f64| -> Option<f64> {
        let (mut a, mut b) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
        for (t, cv) in grid.iter().zip(&cam_vals) {
            if let Some(mv) = m.sample(t + lag) {
                a.push(*cv);
                b.push(mv);
            }
        }
        pearson(&a, &b)
    };

    let k = (opts.search_window / dt).round() as i64;
    let lags: Vec<i64> = (-k..=k).collect();
    let scores: Vec<Option<f64>> = opts.execution.map(&lags, |l| correlate(*l as f64 * dt));
    let (best, peak) = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| (i, s)))
        .fold(None, |acc: Option<(usize, f64)>, (i, s)| match acc {
            Some((_, bs)) if bs >= s => acc,
            _ => Some((i, s)),
        })
        .ok_or(Error::NoMotionToAlign)?;

    let mut offset = lags[best] as f64 * dt;
    let mut peak_value = peak;
    if best > 0 && best + 1 < scores.len() {
        if let (Some(l), Some(r)) = (scores[best - 1], scores[best + 1]) {
            let curv = l - 2.0 * peak + r;
            if curv < 0.0 {
                let delta = (0.5 * (l - r) / curv).clamp(-0.5, 0.5);
                offset += delta * dt;
                peak_value = peak - 0.25 * (l - r) * delta;
            }
        }
    }
    Ok(TimeAlignment { offset, correlation_peak: peak_value.clamp(-1.0, 1.0) })
}
