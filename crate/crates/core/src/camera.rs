//! Equidistant fisheye cameras and calibrated stereo rigs.
//!
//! Pixel coordinates are continuous with the image spanning `[0, width] ×
//! [0, height]`; `u` grows to the right (+x) and `v` downward (+y). Camera
//! frames look down +z.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::geometry::{Pose, Quaternion};
use crate::{Error, Result};

/// Equidistant fisheye (`r = f·θ_d`) with an optional odd polynomial
/// `θ_d = θ·(1 + k₁θ² + k₂θ⁴ + …)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisheyeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub max_theta: f64,
    #[serde(default)]
    pub distortion: Vec<f64>,
}

impl FisheyeCamera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32, max_theta: f64) -> Result<Self> {
        let cam = Self { fx, fy, cx, cy, width, height, max_theta, distortion: Vec::new() };
        cam.validate()?;
        Ok(cam)
    }

    /// 640×480, f = 160 px, centered principal point, 100° half-angle.
    pub fn synthetic_default() -> Self {
        Self {
            fx: 160.0,
            fy: 160.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            max_theta: 100f64.to_radians(),
            distortion: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidConfig("focal lengths must be positive".into()));
        }
        if !(self.max_theta > 0.0 && self.max_theta <= std::f64::consts::PI) {
            return Err(Error::InvalidConfig("max_theta must lie in (0, π]".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("image size must be non-zero".into()));
        }
        Ok(())
    }

    fn distort(&self, theta: f64) -> (f64, f64) {
        // returns θ_d and dθ_d/dθ
        let t2 = theta * theta;
        let (mut poly, mut dpoly, mut pow) = (1.0, 0.0, 1.0);
        for (i, k) in self.distortion.iter().enumerate() {
            let e = 2 * (i + 1);
            dpoly += k * e as f64 * pow * theta;
            pow *= t2;
            poly += k * pow;
        }
        // d/dθ [θ·poly(θ)] = poly + θ·poly'
        (theta * poly, poly + theta * dpoly)
    }

    fn undistort(&self, theta_d: f64) -> f64 {
        if self.distortion.iter().all(|k| *k == 0.0) {
            return theta_d;
        }
        let mut theta = theta_d;
        for _ in 0..30 {
            let (f, df) = self.distort(theta);
            let step = (f - theta_d) / df;
            theta -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        theta
    }

    /// Projects a camera-frame point to pixels.
    pub fn project(&self, p: &Vector3<f64>) -> Result<Vector2<f64>> {
        let n = p.norm();
        if n < 1e-9 {
            return Err(Error::DegeneratePoint);
        }
        let rho = p.x.hypot(p.y);
        let theta = rho.atan2(p.z);
        if theta > self.max_theta {
            return Err(Error::OutsideFieldOfView);
        }
        if rho == 0.0 {
            return Ok(Vector2::new(self.cx, self.cy));
        }
        let (theta_d, _) = self.distort(theta);
        Ok(Vector2::new(
            self.cx + self.fx * theta_d * p.x / rho,
            self.cy + self.fy * theta_d * p.y / rho,
        ))
    }

    /// Unit ray through a pixel.
    pub fn unproject(&self, uv: &Vector2<f64>) -> Result<Vector3<f64>> {
        let mx = (uv.x - self.cx) / self.fx;
        let my = (uv.y - self.cy) / self.fy;
        let theta_d = mx.hypot(my);
        if theta_d == 0.0 {
            return Ok(Vector3::z());
        }
        let theta = self.undistort(theta_d);
        if theta > self.max_theta {
            return Err(Error::OutsideFieldOfView);
        }
        let s = theta.sin() / theta_d;
        Ok(Vector3::new(mx * s, my * s, theta.cos()))
    }

    /// Camera-frame point on the ray through `uv` at depth `z` (its +z coordinate).
    pub fn point_at_depth(&self, uv: &Vector2<f64>, z: f64) -> Result<Vector3<f64>> {
        let ray = self.unproject(uv)?;
        if ray.z <= 1e-12 {
            return Err(Error::DegeneratePoint);
        }
        Ok(ray * (z / ray.z))
    }

    /// Intrinsics for an image resized by `factor`.
    pub fn scale_intrinsics(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidInput(format!("scale factor must be positive, got {factor}")));
        }
        Ok(Self {
            fx: self.fx * factor,
            fy: self.fy * factor,
            cx: self.cx * factor,
            cy: self.cy * factor,
            width: (self.width as f64 * factor).round() as u32,
            height: (self.height as f64 * factor).round() as u32,
            max_theta: self.max_theta,
            distortion: self.distortion.clone(),
        })
    }

    pub fn contains_pixel(&self, uv: &Vector2<f64>) -> bool {
        uv.x >= 0.0 && uv.y >= 0.0 && uv.x <= self.width as f64 && uv.y <= self.height as f64
    }
}

/// Result of a two-ray triangulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    /// Midpoint of the common perpendicular, left-camera frame.
    pub point: Vector3<f64>,
    /// Length of the common perpendicular (meters).
    pub gap: f64,
}

/// Two fisheye cameras; `left_to_right` is the right camera in the left-camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoRig {
    pub left: FisheyeCamera,
    pub right: FisheyeCamera,
    pub left_to_right: Pose,
}

impl StereoRig {
    pub fn new(left: FisheyeCamera, right: FisheyeCamera, left_to_right: Pose) -> Result<Self> {
        let rig = Self { left, right, left_to_right };
        rig.validate()?;
        Ok(rig)
    }

    /// Two default cameras, parallel optical axes, 64 mm baseline along +x.
    pub fn synthetic_default() -> Self {
        Self {
            left: FisheyeCamera::synthetic_default(),
            right: FisheyeCamera::synthetic_default(),
            left_to_right: Pose::from_translation(0.064, 0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        if !(self.baseline() > 0.0) {
            return Err(Error::InvalidConfig("stereo baseline must be positive".into()));
        }
        Ok(())
    }

    pub fn baseline(&self) -> f64 {
        self.left_to_right.translation.norm()
    }

    /// Maps a left-camera point into the right-camera frame.
    pub fn left_to_right_point(&self, p_left: &Vector3<f64>) -> Vector3<f64> {
        self.left_to_right.inverse().transform_point(p_left)
    }

    pub fn project_both(&self, p_left: &Vector3<f64>) -> Result<(Vector2<f64>, Vector2<f64>)> {
        Ok((self.left.project(p_left)?, self.right.project(&self.left_to_right_point(p_left))?))
    }

    /// Midpoint triangulation of a stereo correspondence.
    pub fn triangulate(&self, uv_left: &Vector2<f64>, uv_right: &Vector2<f64>) -> Result<Triangulation> {
        let d1 = self.left.unproject(uv_left)?;
        let d2 = self.left_to_right.rotation.rotate(&self.right.unproject(uv_right)?);
        let o2 = self.left_to_right.translation;
        let b = d1.dot(&d2);
        let denom = 1.0 - b * b;
        if denom.max(0.0).sqrt() < 1e-6 {
            return Err(Error::IllConditionedTriangulation);
        }
        let w0 = -o2;
        let d = d1.dot(&w0);
        let e = d2.dot(&w0);
        let s = (b * e - d) / denom;
        let t = (e - b * d) / denom;
        let p1 = d1 * s;
        let p2 = o2 + d2 * t;
        Ok(Triangulation { point: (p1 + p2) * 0.5, gap: (p1 - p2).norm() })
    }

    pub fn scale_intrinsics(&self, factor: f64) -> Result<Self> {
        Ok(Self {
            left: self.left.scale_intrinsics(factor)?,
            right: self.right.scale_intrinsics(factor)?,
            left_to_right: self.left_to_right,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: RigFile = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&RigFile::from(self))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// JSON pose with `quaternion: [w,x,y,z]` and `translation_m: [x,y,z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseJson {
    pub quaternion: [f64; 4],
    pub translation_m: [f64; 3],
}

impl From<&Pose> for PoseJson {
    fn from(p: &Pose) -> Self {
        Self { quaternion: p.rotation.to_array(), translation_m: p.translation.into() }
    }
}

impl From<Pose> for PoseJson {
    fn from(p: Pose) -> Self {
        (&p).into()
    }
}

impl From<PoseJson> for Pose {
    fn from(p: PoseJson) -> Self {
        Pose::new(Quaternion::from_array(p.quaternion), Vector3::from(p.translation_m))
    }
}

/// On-disk rig calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigFile {
    pub left: FisheyeCamera,
    pub right: FisheyeCamera,
    pub t_left_right: PoseJson,
}

impl From<&StereoRig> for RigFile {
    fn from(r: &StereoRig) -> Self {
        Self { left: r.left.clone(), right: r.right.clone(), t_left_right: (&r.left_to_right).into() }
    }
}

impl TryFrom<RigFile> for StereoRig {
    type Error = Error;

    fn try_from(f: RigFile) -> Result<Self> {
        StereoRig::new(f.left, f.right, f.t_left_right.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn cam_200() -> FisheyeCamera {
        FisheyeCamera::new(200.0, 200.0, 320.0, 240.0, 640, 480, 1.7).unwrap()
    }

    #[test]
    fn optical_axis_maps_to_principal_point() {
        let c = cam_200();
        assert_eq!(c.project(&Vector3::new(0.0, 0.0, 1.0)).unwrap(), Vector2::new(320.0, 240.0));
        assert_eq!(c.unproject(&Vector2::new(320.0, 240.0)).unwrap(), Vector3::z());
    }

    #[test]
    fn equidistant_closed_form() {
        let uv = cam_200().project(&Vector3::new(1.0, 0.0, 1.0)).unwrap();
        assert!((uv.x - (320.0 + 200.0 * FRAC_PI_4)).abs() < 1e-12);
        assert!((uv.x - 477.08).abs() < 0.01);
        assert!((uv.y - 240.0).abs() < 1e-12);
    }

    #[test]
    fn projection_is_scale_invariant() {
        let c = cam_200();
        let p = Vector3::new(0.2, -0.3, 0.7);
        assert!((c.project(&p).unwrap() - c.project(&(p * 2.0)).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn projection_errors() {
        let c = cam_200();
        assert!(matches!(c.project(&Vector3::zeros()), Err(Error::DegeneratePoint)));
        assert!(matches!(c.project(&Vector3::new(0.0, 0.0, -1.0)), Err(Error::OutsideFieldOfView)));
        // 1.7 rad ≈ 340 px from center
        assert!(matches!(c.unproject(&Vector2::new(320.0 + 345.0, 240.0)), Err(Error::OutsideFieldOfView)));
    }

    #[test]
    fn u_increasing_tilts_ray_toward_plus_x() {
        let r = cam_200().unproject(&Vector2::new(400.0, 240.0)).unwrap();
        assert!(r.x > 0.0 && r.y.abs() < 1e-15);
    }

    #[test]
    fn unproject_project_round_trip() {
        for cam in [cam_200(), {
            let mut c = cam_200();
            c.distortion = vec![0.02, -0.004];
            c
        }] {
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            for _ in 0..1000 {
                // inside the 1.7 rad field of view: radius < 340 px
                let (r, phi) = (rng.random_range(0.0..330.0), rng.random_range(0.0..std::f64::consts::TAU));
                let uv = Vector2::new(320.0 + r * phi.cos(), 240.0 + r * phi.sin());
                let ray = cam.unproject(&uv).unwrap();
                assert!((ray.norm() - 1.0).abs() < 1e-12);
                let back = cam.project(&ray).unwrap();
                assert!((back - uv).norm() < 1e-6, "{uv:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn scaling_commutes_with_projection() {
        let c = FisheyeCamera::synthetic_default();
        let half = c.scale_intrinsics(0.5).unwrap();
        assert_eq!((half.width, half.height), (320, 240));
        assert_eq!(c.scale_intrinsics(1.0).unwrap(), c);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.1..1.0));
            let full = c.project(&p).unwrap();
            let small = half.project(&p).unwrap();
            assert!((full - small * 2.0).norm() < 1e-9);
        }
        assert!(c.scale_intrinsics(0.0).is_err());
    }

    #[test]
    fn triangulation_recovers_points_in_working_volume() {
        let rig = StereoRig::synthetic_default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let z = rng.random_range(0.1..1.0);
            let p = Vector3::new(rng.random_range(-0.5..0.5) * z, rng.random_range(-0.5..0.5) * z, z);
            let (l, r) = rig.project_both(&p).unwrap();
            let tri = rig.triangulate(&l, &r).unwrap();
            assert!((tri.point - p).norm() < 1e-6, "{p:?}");
            assert!(tri.gap < 1e-6);
        }
        let p = Vector3::new(0.01, -0.02, 0.5);
        let (l, r) = rig.project_both(&p).unwrap();
        assert!((rig.triangulate(&l, &r).unwrap().point - p).norm() < 1e-6);
    }

    #[test]
    fn point_on_baseline_axis_is_ill_conditioned() {
        let rig = StereoRig::synthetic_default();
        let p = Vector3::new(2.0, 0.0, 0.0);
        let (l, r) = rig.project_both(&p).unwrap();
        assert!(matches!(rig.triangulate(&l, &r), Err(Error::IllConditionedTriangulation)));
    }

    #[test]
    fn zero_baseline_rejected() {
        let c = FisheyeCamera::synthetic_default();
        assert!(StereoRig::new(c.clone(), c, Pose::identity()).is_err());
    }

    #[test]
    fn rig_json_uses_fixed_keys() {
        let rig = StereoRig::synthetic_default();
        let v = serde_json::to_value(RigFile::from(&rig)).unwrap();
        for key in ["left", "right", "t_left_right"] {
            assert!(v.get(key).is_some());
        }
        for key in ["fx", "fy", "cx", "cy", "width", "height", "max_theta", "distortion"] {
            assert!(v["left"].get(key).is_some(), "{key}");
        }
        assert_eq!(v["t_left_right"]["translation_m"][0], 0.064);
        let back: StereoRig = serde_json::from_value::<RigFile>(v).unwrap().try_into().unwrap();
        assert_eq!(back, rig);
    }
}
