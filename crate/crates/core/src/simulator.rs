//! Synthetic ground truth: smooth controller and headset motion, noisy mocap
//! streams with dropouts, camera frames, and an oracle predictor.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::camera::{PoseJson, StereoRig};
use crate::exec::Execution;
use crate::geometry::{Pose, Quaternion, TimedPose, TimedTrajectory};
use crate::labelgen::{FrameRecord, LabelRow};
use crate::metrics::PredictionRow;
use crate::pipeline::MocapStream;
use crate::ssdaf::{bin_orientation, OrientationBinning};
use crate::{Error, Result};

/// Length of the post-dropout window with inflated noise (seconds).
pub const REINIT_TRANSIENT: f64 = 0.6;
/// Noise multiplier inside the reinitialization window.
pub const TRANSIENT_GAIN: f64 = 5.0;

const KNOT_INTERVAL: f64 = 1.0;

/// Rotation σ in radians, translation σ in meters (RMS of the error vector norm).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub rot_headset: f64,
    pub trans_headset: f64,
    pub rot_ctrl: f64,
    pub trans_ctrl: f64,
}

impl NoiseConfig {
    /// Calibration residual magnitudes of a physical headset and controller
    /// (0.349°/6.693 mm headset, 0.032°/0.658 mm controller).
    pub fn reference_rig() -> Self {
        Self {
            rot_headset: 0.349f64.to_radians(),
            trans_headset: 6.693e-3,
            rot_ctrl: 0.032f64.to_radians(),
            trans_ctrl: 0.658e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DropoutConfig {
    /// Expected number of tracking losses per second.
    pub rate: f64,
    /// Mean gap length in camera frames.
    pub mean_gap_frames: f64,
}

/// Omitted keys in a config file take their [`Default`] values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub duration: f64,
    pub mocap_rate: f64,
    pub camera_rate: f64,
    pub noise: NoiseConfig,
    pub dropout: DropoutConfig,
    /// `t_mocap = t_camera + clock_offset`.
    pub clock_offset: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration: 60.0,
            mocap_rate: 500.0,
            camera_rate: 30.0,
            noise: NoiseConfig::default(),
            dropout: DropoutConfig::default(),
            clock_offset: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.noise;
        if !(self.duration > 0.0 && self.mocap_rate > 0.0 && self.camera_rate > 0.0) {
            return Err(Error::InvalidConfig("duration and rates must be positive".into()));
        }
        if self.camera_rate > self.mocap_rate {
            return Err(Error::InvalidConfig("camera rate exceeds mocap rate".into()));
        }
        if [n.rot_headset, n.trans_headset, n.rot_ctrl, n.trans_ctrl].iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig("noise sigmas must be non-negative".into()));
        }
        if !(self.dropout.rate >= 0.0 && self.dropout.mean_gap_frames >= 0.0) {
            return Err(Error::InvalidConfig("dropout parameters must be non-negative".into()));
        }
        Ok(())
    }

    fn mocap_times(&self) -> Vec<f64> {
        let n = (self.duration * self.mocap_rate).round() as usize;
        (0..=n).map(|i| i as f64 / self.mocap_rate).collect()
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Fixed rig extrinsics the simulator renders with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimCalibration {
    /// Left-camera pose in the headset-constellation frame.
    #[serde(with = "pose_json")]
    pub hand_eye: Pose,
    /// Tip pose in the controller back-constellation frame.
    #[serde(with = "pose_json")]
    pub tip_offset: Pose,
    /// Origin of the camera tracker's world frame, expressed in the mocap frame.
    #[serde(with = "pose_json")]
    pub camera_world: Pose,
}

impl Default for SimCalibration {
    fn default() -> Self {
        Self {
            hand_eye: Pose::new(
                Quaternion::from_rotation_vector(&Vector3::new(0.05, -0.12, 0.03)),
                Vector3::new(0.032, -0.048, 0.085),
            ),
            tip_offset: Pose::new(
                Quaternion::from_rotation_vector(&Vector3::new(-0.2, 0.1, 0.05)),
                Vector3::new(0.004, -0.062, 0.118),
            ),
            camera_world: Pose::new(
                Quaternion::from_rotation_vector(&Vector3::new(0.0, 0.0, 0.7)),
                Vector3::new(1.2, -0.4, 0.3),
            ),
        }
    }
}

mod pose_json {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Pose, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseJson::from(*p).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Pose, D::Error> {
        PoseJson::deserialize(d).map(Pose::from)
    }
}

/// Uniform cubic B-spline over `n + 3` control values.
struct BSpline<T> {
    ctrl: Vec<T>,
    h: f64,
}

impl<T> BSpline<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    fn eval(&self, t: f64) -> T {
        let segments = self.ctrl.len() - 3;
        let u = (t / self.h).max(0.0);
        let seg = (u.floor() as usize).min(segments - 1);
        let s = u - seg as f64;
        let b = [
            (1.0 - s).powi(3) / 6.0,
            (3.0 * s.powi(3) - 6.0 * s * s + 4.0) / 6.0,
            (-3.0 * s.powi(3) + 3.0 * s * s + 3.0 * s + 1.0) / 6.0,
            s.powi(3) / 6.0,
        ];
        let c = &self.ctrl[seg..seg + 4];
        c[0] * b[0] + c[1] * b[1] + c[2] * b[2] + c[3] * b[3]
    }
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    Vector3::from(UnitSphere.sample(rng))
}

/// Random vector of norm at most `radius`, uniform in the ball.
fn in_ball(rng: &mut impl Rng, radius: f64) -> Vector3<f64> {
    random_unit(rng) * radius * rng.random::<f64>().cbrt()
}

/// Point in a cone around `axis` with half-angle `half_angle`, at a distance
/// in `[r_min, r_max]` from the origin.
fn in_cone(rng: &mut impl Rng, axis: &Vector3<f64>, half_angle: f64, r_min: f64, r_max: f64) -> Vector3<f64> {
    let cos_max = half_angle.cos();
    let cos_t = 1.0 - rng.random::<f64>() * (1.0 - cos_max);
    let sin_t = (1.0 - cos_t * cos_t).sqrt();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let a = axis.normalize();
    let helper = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = a.cross(&helper).normalize();
    let e2 = a.cross(&e1);
    let dir = a * cos_t + (e1 * phi.cos() + e2 * phi.sin()) * sin_t;
    dir * rng.random_range(r_min..=r_max)
}

fn spline_count(duration: f64) -> usize {
    (duration / KNOT_INTERVAL).ceil().max(1.0) as usize + 3
}

fn sample_trajectory(
    times: &[f64],
    rate: f64,
    base: Quaternion,
    pos: &BSpline<Vector3<f64>>,
    rot: &BSpline<Vector3<f64>>,
) -> TimedTrajectory {
    let samples = times
        .iter()
        .map(|&t| TimedPose { t, pose: Pose::new(base * Quaternion::from_rotation_vector(&rot.eval(t)), pos.eval(t)) })
        .collect();
    TimedTrajectory::new(samples, rate).expect("uniform grid is increasing")
}

/// Ground-truth motion on the mocap clock's true time base:
/// the tip pose in the left-camera frame and the headset pose in the mocap frame.
///
/// Tip positions stay in a cone in front of the camera, tilted toward the
/// lower right of the image, between 0.25 m and 0.9 m from the camera center.
pub fn gen_trajectories(cfg: &SimConfig) -> (TimedTrajectory, TimedTrajectory) {
    let mut rng = cfg.rng(1);
    let n = spline_count(cfg.duration);
    let axis = Vector3::new(0.25, 0.3, 1.0);
    let tip_pos = BSpline { ctrl: (0..n).map(|_| in_cone(&mut rng, &axis, 0.6, 0.25, 0.9)).collect(), h: KNOT_INTERVAL };
    let tip_rot = BSpline { ctrl: (0..n).map(|_| in_ball(&mut rng, 0.8)).collect(), h: KNOT_INTERVAL };
    let head_pos = BSpline {
        ctrl: (0..n).map(|_| Vector3::new(0.0, 0.0, 1.6) + in_ball(&mut rng, 0.1)).collect(),
        h: KNOT_INTERVAL,
    };
    let head_rot = BSpline { ctrl: (0..n).map(|_| in_ball(&mut rng, 0.45)).collect(), h: KNOT_INTERVAL };

    let times = cfg.mocap_times();
    // headset looks roughly horizontal: camera z forward along mocap +x
    let head_base = Quaternion::from_rotation_vector(&Vector3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0));
    (
        sample_trajectory(&times, cfg.mocap_rate, Quaternion::identity(), &tip_pos, &tip_rot),
        sample_trajectory(&times, cfg.mocap_rate, head_base, &head_pos, &head_rot),
    )
}

/// Perturbs a pose: rotation by a random axis with angle `~ N(0, σ_rot)`
/// (applied in the outer frame), translation by isotropic noise whose RMS
/// norm is `σ_trans`.
pub fn perturb(pose: &Pose, sigma_rot: f64, sigma_trans: f64, rng: &mut impl Rng) -> Pose {
    let angle = Normal::new(0.0, sigma_rot).expect("sigma >= 0").sample(rng);
    let axis_noise = Normal::new(0.0, sigma_trans / 3f64.sqrt()).expect("sigma >= 0");
    let dq = Quaternion::from_axis_angle(&random_unit(rng), angle);
    let dt = Vector3::from_fn(|_, _| axis_noise.sample(rng));
    Pose::new(dq * pose.rotation, pose.translation + dt)
}

/// Noisy observation of `traj` with dropouts.
///
/// Tracking losses arrive as a Poisson process at `dropout.rate` per second;
/// each gap lasts an exponentially distributed number of camera frames with
/// mean `dropout.mean_gap_frames`, converted to mocap samples. Samples in a
/// gap are flagged invalid. The [`REINIT_TRANSIENT`] that follows carries
/// [`TRANSIENT_GAIN`] times the configured noise.
pub fn observe_mocap(
    traj: &TimedTrajectory,
    sigma_rot: f64,
    sigma_trans: f64,
    dropout: &DropoutConfig,
    camera_rate: f64,
    rng: &mut impl Rng,
) -> MocapStream {
    let samples = traj.samples();
    let mut valid = vec![true; samples.len()];
    let mut gain = vec![1.0; samples.len()];
    if dropout.rate > 0.0 && dropout.mean_gap_frames > 0.0 && samples.len() > 1 {
        let arrivals = Exp::new(dropout.rate).expect("rate > 0");
        let gaps = Exp::new(1.0 / dropout.mean_gap_frames).expect("mean > 0");
        let (t0, t1) = (samples[0].t, samples[samples.len() - 1].t);
        let mut t = t0 + arrivals.sample(rng);
        while t < t1 {
            let gap = gaps.sample(rng).ceil().max(1.0) / camera_rate;
            let start = samples.partition_point(|s| s.t < t);
            let end = samples.partition_point(|s| s.t < t + gap);
            let settle = samples.partition_point(|s| s.t < t + gap + REINIT_TRANSIENT);
            valid[start..end].iter_mut().for_each(|v| *v = false);
            gain[end..settle].iter_mut().for_each(|g| *g = TRANSIENT_GAIN);
            t += gap + arrivals.sample(rng);
        }
    }
    let noisy = samples
        .iter()
        .zip(&gain)
        .map(|(s, g)| TimedPose { t: s.t, pose: perturb(&s.pose, sigma_rot * g, sigma_trans * g, rng) })
        .collect();
    MocapStream { traj: TimedTrajectory::new(noisy, traj.rate_hz()).expect("same timestamps"), valid }
}

/// Everything one simulation run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub config: SimConfig,
    pub calibration: SimCalibration,
    /// Noise-free tip pose in the left camera, on true time.
    pub truth_tip: TimedTrajectory,
    /// Noise-free headset pose, on true time.
    pub truth_headset: TimedTrajectory,
    /// Headset constellation as seen by mocap, on the mocap clock.
    pub mocap_headset: MocapStream,
    /// Controller back constellation as seen by mocap, on the mocap clock.
    pub mocap_controller: MocapStream,
    /// Left-camera poses from the headset's own tracker, on the camera clock.
    pub camera: TimedTrajectory,
    /// Camera frames with noise-free tip poses.
    pub records: Vec<FrameRecord>,
    /// Simultaneous `(T_V_CB, T_V_CT)` observations from a tip-calibration session.
    pub tip_calib: Vec<(Pose, Pose)>,
}

pub const TIP_CALIB_SAMPLES: usize = 200;

/// Renders a full dataset: mocap streams, camera poses and frame records.
///
/// Camera frame `k` is exposed at the mocap tick nearest `k / camera_rate`,
/// so every frame has an exact mocap counterpart `clock_offset` later on the
/// mocap clock.
pub fn render_dataset(cfg: &SimConfig, calib: &SimCalibration) -> Result<SimDataset> {
    cfg.validate()?;
    let (truth_tip, truth_headset) = gen_trajectories(cfg);
    let n = truth_tip.len();

    let mut back = Vec::with_capacity(n);
    for (tip, head) in truth_tip.samples().iter().zip(truth_headset.samples()) {
        let cam = head.pose * calib.hand_eye;
        let tip_v = cam * tip.pose;
        back.push(TimedPose { t: tip.t, pose: tip_v * calib.tip_offset.inverse() });
    }
    let back = TimedTrajectory::new(back, cfg.mocap_rate)?;

    let mut rng_h = cfg.rng(2);
    let mut rng_c = cfg.rng(3);
    let nz = cfg.noise;
    let mut mocap_headset = observe_mocap(
        &truth_headset,
        nz.rot_headset,
        nz.trans_headset,
        &DropoutConfig::default(),
        cfg.camera_rate,
        &mut rng_h,
    );
    let mut mocap_controller =
        observe_mocap(&back, nz.rot_ctrl, nz.trans_ctrl, &cfg.dropout, cfg.camera_rate, &mut rng_c);
    mocap_headset.traj = mocap_headset.traj.shifted(cfg.clock_offset);
    mocap_controller.traj = mocap_controller.traj.shifted(cfg.clock_offset);

    let ratio = cfg.mocap_rate / cfg.camera_rate;
    let mut camera = Vec::new();
    let mut records = Vec::new();
    for k in 0.. {
        let i = (k as f64 * ratio).round() as usize;
        if i >= n {
            break;
        }
        let t = i as f64 / cfg.mocap_rate;
        let cam_world = calib.camera_world.inverse() * truth_headset.samples()[i].pose * calib.hand_eye;
        camera.push(TimedPose { t, pose: cam_world });
        records.push(FrameRecord {
            timestamp: t,
            frame_id: k as u64,
            image_refs: None,
            tip_in_camera: truth_tip.samples()[i].pose,
            camera_in_world: cam_world,
            tracking_valid: mocap_controller.valid[i] && mocap_headset.valid[i],
        });
    }
    let camera = TimedTrajectory::new(camera, cfg.camera_rate)?;

    let mut rng_t = cfg.rng(4);
    let tip_calib = (0..TIP_CALIB_SAMPLES)
        .map(|_| {
            let cb = Pose::new(
                Quaternion::from_rotation_vector(&in_ball(&mut rng_t, std::f64::consts::PI)),
                Vector3::new(0.0, 0.0, 1.0) + in_ball(&mut rng_t, 0.5),
            );
            let ct = cb * calib.tip_offset;
            (cb, perturb(&ct, nz.rot_ctrl, nz.trans_ctrl, &mut rng_t))
        })
        .collect();

    Ok(SimDataset {
        config: *cfg,
        calibration: *calib,
        truth_tip,
        truth_headset,
        mocap_headset,
        mocap_controller,
        camera,
        records,
        tip_calib,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreModel {
    Constant { score: f64 },
    /// Gaussian around `mean`, clipped to `[0, 1]`.
    Noisy { mean: f64, sigma: f64 },
}

/// Stand-in for a trained network: echoes groundtruth with configured noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePredictor {
    pub seed: u64,
    /// Per-axis pixel noise on keypoints.
    pub pixel_sigma: f64,
    pub depth_sigma: f64,
    /// Rotation-angle noise (radians), random axis.
    pub orientation_sigma: f64,
    /// Per-axis pixel noise on box centers and sizes.
    #[serde(default)]
    pub box_sigma: f64,
    pub score: ScoreModel,
    /// When set, bin scores are emitted as a one-hot of the noisy orientation.
    #[serde(skip)]
    pub binning: Option<OrientationBinning>,
}

impl Default for OraclePredictor {
    fn default() -> Self {
        Self {
            seed: 0,
            pixel_sigma: 0.0,
            depth_sigma: 0.0,
            orientation_sigma: 0.0,
            box_sigma: 0.0,
            score: ScoreModel::Constant { score: 1.0 },
            binning: None,
        }
    }
}

impl OraclePredictor {
    fn predict_one(&self, index: usize, row: &LabelRow, width: f64, height: f64) -> Result<PredictionRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let px = Normal::new(0.0, self.pixel_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let dz = Normal::new(0.0, self.depth_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let bx = Normal::new(0.0, self.box_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;

        let kp = |k: [f64; 3], rng: &mut ChaCha8Rng| {
            vec![k[0] + px.sample(rng), k[1] + px.sample(rng), k[2] + dz.sample(rng)]
        };
        let kp_l = kp(row.kp_l, &mut rng);
        let kp_r = kp(row.kp_r, &mut rng);
        let jitter = |b: [f64; 4], rng: &mut ChaCha8Rng| {
            [
                b[0] + bx.sample(rng) / width,
                b[1] + bx.sample(rng) / height,
                (b[2] + bx.sample(rng) / width).max(1.0 / width),
                (b[3] + bx.sample(rng) / height).max(1.0 / height),
            ]
        };
        let box_l = jitter(row.box_l, &mut rng);
        let box_r = jitter(row.box_r, &mut rng);
        let q = perturb(
            &Pose::from_rotation(Quaternion::from_array(row.q)),
            self.orientation_sigma,
            0.0,
            &mut rng,
        )
        .rotation;
        let score = match self.score {
            ScoreModel::Constant { score } => score,
            ScoreModel::Noisy { mean, sigma } => (mean
                + Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?.sample(&mut rng))
            .clamp(0.0, 1.0),
        };
        let bin_scores = match &self.binning {
            Some(scheme) => {
                let idx = bin_orientation(&q, scheme)?;
                Some((0..scheme.bins()).map(|i| if i == idx { 1.0 } else { 0.0 }).collect())
            }
            None => None,
        };
        Ok(PredictionRow {
            t: row.t,
            frame_id: row.frame_id,
            box_l,
            box_r: Some(box_r),
            kp_l: Some(kp_l),
            kp_r: Some(kp_r),
            q: Some(q.to_array()),
            label: row.label,
            score,
            bin_scores,
        })
    }
}

/// Predictions for every label row. Each row draws from its own RNG stream,
/// so results do not depend on the execution mode.
pub fn oracle_predict(
    labels: &[LabelRow],
    oracle: &OraclePredictor,
    rig: &StereoRig,
    exec: Execution,
) -> Result<Vec<PredictionRow>> {
    let (w, h) = (rig.left.width as f64, rig.left.height as f64);
    exec.map_range(labels.len(), |i| oracle.predict_one(i, &labels[i], w, h)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelgen::clean_dataset;

    fn short(seed: u64) -> SimConfig {
        SimConfig { seed, duration: 8.0, ..SimConfig::default() }
    }

    #[test]
    fn deterministic_per_seed() {
        let (a, b) = gen_trajectories(&short(5));
        let (c, d) = gen_trajectories(&short(5));
        assert_eq!(a, c);
        assert_eq!(b, d);
        let (e, _) = gen_trajectories(&short(6));
        assert_ne!(a, e);
    }

    #[test]
    fn tip_stays_within_range_and_in_front() {
        for seed in 0..5 {
            let (tip, _) = gen_trajectories(&short(seed));
            for s in tip.samples() {
                let p = s.pose.translation;
                assert!(p.norm() <= 0.9 + 1e-12 && p.norm() > 0.1, "{p:?}");
                assert!(p.z > 0.0);
            }
        }
    }

    #[test]
    fn angular_velocity_is_smooth() {
        let (tip, head) = gen_trajectories(&short(2));
        for traj in [tip, head] {
            let w = traj.angular_velocity().unwrap();
            let dt = 1.0 / 500.0;
            let max_acc = w.windows(2).map(|p| (p[1].1 - p[0].1).norm() / dt).fold(0.0, f64::max);
            assert!(max_acc < 10.0, "{max_acc}");
        }
    }

    #[test]
    fn noise_free_observation_is_identity() {
        let (tip, _) = gen_trajectories(&short(1));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = observe_mocap(&tip, 0.0, 0.0, &DropoutConfig::default(), 30.0, &mut rng);
        assert_eq!(obs.traj, tip);
        assert!(obs.valid.iter().all(|v| *v));
    }

    #[test]
    fn observed_noise_matches_sigma() {
        let samples: Vec<_> =
            (0..100_000).map(|i| TimedPose { t: i as f64 * 0.002, pose: Pose::identity() }).collect();
        let traj = TimedTrajectory::new(samples, 500.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (sr, st) = (0.01, 0.005);
        let obs = observe_mocap(&traj, sr, st, &DropoutConfig::default(), 30.0, &mut rng);
        let n = obs.traj.len() as f64;
        let rot = (obs.traj.samples().iter().map(|s| s.pose.rotation.angle().powi(2)).sum::<f64>() / n).sqrt();
        let trans = (obs.traj.samples().iter().map(|s| s.pose.translation.norm_squared()).sum::<f64>() / n).sqrt();
        assert!((rot / sr - 1.0).abs() < 0.03, "{rot}");
        assert!((trans / st - 1.0).abs() < 0.03, "{trans}");
    }

    #[test]
    fn record_count_and_timing() {
        let cfg = short(0);
        let ds = render_dataset(&cfg, &SimCalibration::default()).unwrap();
        let expected = cfg.duration * cfg.camera_rate;
        assert!((ds.records.len() as f64 - expected).abs() <= 1.0, "{}", ds.records.len());
        for r in &ds.records {
            let i = (r.timestamp * cfg.mocap_rate).round();
            assert!((r.timestamp * cfg.mocap_rate - i).abs() < 1e-9);
        }
    }

    #[test]
    fn rendered_chain_is_consistent() {
        let calib = SimCalibration::default();
        let ds = render_dataset(&short(3), &calib).unwrap();
        for r in ds.records.iter().step_by(7) {
            let i = (r.timestamp * 500.0).round() as usize;
            let head = ds.mocap_headset.traj.samples()[i].pose;
            let back = ds.mocap_controller.traj.samples()[i].pose;
            let tip = crate::geometry::tip_pose_in_camera(&calib.hand_eye, &head, &back, &calib.tip_offset);
            let (dr, dt) = tip.distance(&r.tip_in_camera);
            assert!(dr < 1e-9 && dt < 1e-9);
        }
    }

    #[test]
    fn dropouts_are_removed_by_cleaning() {
        let cfg = SimConfig {
            dropout: DropoutConfig { rate: 0.2, mean_gap_frames: 5.0 },
            duration: 30.0,
            ..SimConfig::default()
        };
        let ds = render_dataset(&cfg, &SimCalibration::default()).unwrap();
        let invalid: Vec<usize> =
            ds.records.iter().enumerate().filter(|(_, r)| !r.tracking_valid).map(|(i, _)| i).collect();
        assert!(!invalid.is_empty());
        let mut expect_dropped = vec![false; ds.records.len()];
        for &i in &invalid {
            for d in expect_dropped.iter_mut().skip(i).take(21) {
                *d = true;
            }
        }
        let (kept, report) = clean_dataset(&ds.records);
        let kept_ids: Vec<u64> = kept.iter().map(|r| r.frame_id).collect();
        let expected_ids: Vec<u64> = ds
            .records
            .iter()
            .zip(&expect_dropped)
            .filter(|(r, d)| !**d && r.tip_in_camera.translation.norm() <= 1.0)
            .map(|(r, _)| r.frame_id)
            .collect();
        assert_eq!(kept_ids, expected_ids);
        assert_eq!(report.dropped_missing, invalid.len());
    }

    #[test]
    fn oracle_is_deterministic_across_modes() {
        let rig = StereoRig::synthetic_default();
        let ds = render_dataset(&short(4), &SimCalibration::default()).unwrap();
        let labels: Vec<LabelRow> = ds
            .records
            .iter()
            .filter_map(|r| crate::labelgen::label_record(r, &rig).ok())
            .map(|s| LabelRow::from(&s))
            .collect();
        let oracle = OraclePredictor { pixel_sigma: 2.0, depth_sigma: 0.01, seed: 9, ..Default::default() };
        let a = oracle_predict(&labels, &oracle, &rig, Execution::Sequential).unwrap();
        let b = oracle_predict(&labels, &oracle, &rig, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let exact = oracle_predict(&labels, &OraclePredictor::default(), &rig, Execution::Parallel).unwrap();
        for (l, p) in labels.iter().zip(&exact) {
            assert_eq!(p, &PredictionRow::from_label(l, 1.0));
        }
    }
}
