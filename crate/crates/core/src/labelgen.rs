//! Training labels from synchronized tip poses, plus dataset cleaning.
//!
//! The hand is approximated by a fixed cube in the tip's local frame. Its
//! eight corners are mapped into each camera and the tightest axis-aligned
//! box around the visible projections becomes the 2D detection label.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::camera::{FisheyeCamera, StereoRig};
use crate::exec::Execution;
use crate::geometry::{Pose, Quaternion};
use crate::{Error, Result};

/// Per-axis `{min, max}` bounds of the hand cube in tip space (meters).
pub const CUBE_BOUNDS: [[f64; 2]; 3] = [[-0.03, 0.05], [-0.05, 0.01], [-0.01, 0.10]];

/// Tips farther than this from the camera are dropped (meters).
pub const MAX_TIP_RANGE: f64 = 1.0;

/// Camera frames discarded after tracking comes back.
pub const REINIT_FRAMES: usize = 20;

/// Prediction error above which a frame is queued for review (meters).
pub const SUSPECT_ERROR: f64 = 0.03;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub timestamp: f64,
    pub frame_id: u64,
    pub image_refs: Option<(String, String)>,
    /// Tip pose in the left-camera frame.
    pub tip_in_camera: Pose,
    /// Left-camera pose in the world frame.
    pub camera_in_world: Pose,
    pub tracking_valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    RightHand,
    Background,
}

/// Projected tip: pixel coordinates plus depth along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl Keypoint {
    pub fn uv(&self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.u, self.v, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { u: a[0], v: a[1], z: a[2] }
    }

    /// Projects a camera-frame point.
    pub fn observe(cam: &FisheyeCamera, p: &Vector3<f64>) -> Result<Self> {
        let uv = cam.project(p)?;
        Ok(Self { u: uv.x, v: uv.y, z: p.z })
    }

    /// Back-projects to the camera-frame point.
    pub fn point(&self, cam: &FisheyeCamera) -> Result<Vector3<f64>> {
        cam.point_at_depth(&self.uv(), self.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub record: FrameRecord,
    pub box_left: BBox,
    pub box_right: BBox,
    pub keypoint_left: Keypoint,
    pub keypoint_right: Keypoint,
    pub class_label: ClassLabel,
}

impl LabeledSample {
    pub fn tip_position(&self) -> Vector3<f64> {
        self.record.tip_in_camera.translation
    }
}

/// Tallies of [`clean_dataset`]; `kept` plus the three drop counts equals the input size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CleanReport {
    pub kept: usize,
    pub dropped_range: usize,
    pub dropped_missing: usize,
    pub dropped_reinit: usize,
    pub flagged_suspect: usize,
}

/// Cube corners in the camera frame. Corner `i` takes the min/max bound on
/// x, y, z according to bits 2, 1, 0 of `i`.
pub fn bounding_cube_corners(tip_in_camera: &Pose) -> [Vector3<f64>; 8] {
    std::array::from_fn(|i| {
        let local = Vector3::new(
            CUBE_BOUNDS[0][(i >> 2) & 1],
            CUBE_BOUNDS[1][(i >> 1) & 1],
            CUBE_BOUNDS[2][i & 1],
        );
        tip_in_camera.transform_point(&local)
    })
}

/// Pixel-space box `(x0, y0, x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PixelBox {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn clip(&self, width: f64, height: f64) -> PixelBox {
        PixelBox {
            x0: self.x0.clamp(0.0, width),
            y0: self.y0.clamp(0.0, height),
            x1: self.x1.clamp(0.0, width),
            y1: self.y1.clamp(0.0, height),
        }
    }

    pub fn normalized(&self, width: f64, height: f64) -> BBox {
        BBox::from_corners(self.x0 / width, self.y0 / height, self.x1 / width, self.y1 / height)
    }
}

/// Projections of the corners that fall inside the field of view.
pub fn visible_projections(corners: &[Vector3<f64>], cam: &FisheyeCamera) -> Vec<Vector2<f64>> {
    corners.iter().filter_map(|c| cam.project(c).ok()).collect()
}

/// Tight pixel box around the visible corner projections, before clipping.
pub fn hand_box_pixels(corners: &[Vector3<f64>], cam: &FisheyeCamera) -> Result<PixelBox> {
    let pts = visible_projections(corners, cam);
    if pts.is_empty() {
        return Err(Error::HandNotVisible);
    }
    let mut b = PixelBox { x0: f64::INFINITY, y0: f64::INFINITY, x1: f64::NEG_INFINITY, y1: f64::NEG_INFINITY };
    for p in &pts {
        b.x0 = b.x0.min(p.x);
        b.y0 = b.y0.min(p.y);
        b.x1 = b.x1.max(p.x);
        b.y1 = b.y1.max(p.y);
    }
    Ok(b)
}

/// Normalized hand box, clipped to the image.
pub fn project_hand_box(corners: &[Vector3<f64>], cam: &FisheyeCamera) -> Result<BBox> {
    let (w, h) = (cam.width as f64, cam.height as f64);
    let clipped = hand_box_pixels(corners, cam)?.clip(w, h);
    if clipped.x1 <= clipped.x0 || clipped.y1 <= clipped.y0 {
        return Err(Error::HandNotVisible);
    }
    Ok(clipped.normalized(w, h))
}

/// Builds boxes and keypoints for both cameras of the rig.
pub fn label_record(record: &FrameRecord, rig: &StereoRig) -> Result<LabeledSample> {
    let corners_left = bounding_cube_corners(&record.tip_in_camera);
    let corners_right = corners_left.map(|c| rig.left_to_right_point(&c));
    let tip_left = record.tip_in_camera.translation;
    let tip_right = rig.left_to_right_point(&tip_left);
    Ok(LabeledSample {
        record: record.clone(),
        box_left: project_hand_box(&corners_left, &rig.left)?,
        box_right: project_hand_box(&corners_right, &rig.right)?,
        keypoint_left: Keypoint::observe(&rig.left, &tip_left)?,
        keypoint_right: Keypoint::observe(&rig.right, &tip_right)?,
        class_label: ClassLabel::RightHand,
    })
}

/// Labels every record, preserving order.
pub fn label_records(records: &[FrameRecord], rig: &StereoRig, exec: Execution) -> Vec<Result<LabeledSample>> {
    exec.map(records, |r| label_record(r, rig))
}

/// Applies the automatic cleaning rules, in this order per frame: missing
/// mocap (`tracking_valid == false`), the [`REINIT_FRAMES`] frames that follow
/// a tracking gap, and tips beyond [`MAX_TIP_RANGE`].
pub fn clean_dataset(records: &[FrameRecord]) -> (Vec<FrameRecord>, CleanReport) {
    let mut report = CleanReport::default();
    let mut kept = Vec::with_capacity(records.len());
    let mut reinit_left = 0usize;
    for r in records {
        if !r.tracking_valid {
            report.dropped_missing += 1;
            reinit_left = REINIT_FRAMES;
        } else if reinit_left > 0 {
            report.dropped_reinit += 1;
            reinit_left -= 1;
        } else if r.tip_in_camera.translation.norm() > MAX_TIP_RANGE {
            report.dropped_range += 1;
        } else {
            kept.push(r.clone());
        }
    }
    report.kept = kept.len();
    (kept, report)
}

/// Frame ids whose predicted tip position is more than [`SUSPECT_ERROR`]
/// from the label.
pub fn flag_suspect_frames(samples: &[LabeledSample], predictions: &[Vector3<f64>]) -> Result<Vec<u64>> {
    if samples.len() != predictions.len() {
        return Err(Error::CountMismatch { predictions: predictions.len(), records: samples.len() });
    }
    Ok(samples
        .iter()
        .zip(predictions)
        .filter(|(s, p)| (*p - s.tip_position()).norm() > SUSPECT_ERROR)
        .map(|(s, _)| s.record.frame_id)
        .collect())
}

/// One line of a label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub t: f64,
    pub frame_id: u64,
    pub box_l: [f64; 4],
    pub box_r: [f64; 4],
    pub kp_l: [f64; 3],
    pub kp_r: [f64; 3],
    pub q: [f64; 4],
    pub label: ClassLabel,
}

impl From<&LabeledSample> for LabelRow {
    fn from(s: &LabeledSample) -> Self {
        Self {
            t: s.record.timestamp,
            frame_id: s.record.frame_id,
            box_l: s.box_left.to_array(),
            box_r: s.box_right.to_array(),
            kp_l: s.keypoint_left.to_array(),
            kp_r: s.keypoint_right.to_array(),
            q: s.record.tip_in_camera.rotation.to_array(),
            label: s.class_label,
        }
    }
}

impl LabelRow {
    /// Rebuilds the sample; the tip position is recovered from `kp_l` through the left camera.
    pub fn to_sample(&self, rig: &StereoRig) -> Result<LabeledSample> {
        let kp_l = Keypoint::from_array(self.kp_l);
        let translation = match self.label {
            ClassLabel::RightHand => kp_l.point(&rig.left)?,
            ClassLabel::Background => Vector3::zeros(),
        };
        Ok(LabeledSample {
            record: FrameRecord {
                timestamp: self.t,
                frame_id: self.frame_id,
                image_refs: None,
                tip_in_camera: Pose::new(Quaternion::from_array(self.q), translation),
                camera_in_world: Pose::identity(),
                tracking_valid: true,
            },
            box_left: BBox::from_array(self.box_l),
            box_right: BBox::from_array(self.box_r),
            keypoint_left: kp_l,
            keypoint_right: Keypoint::from_array(self.kp_r),
            class_label: self.label,
        })
    }

    /// Label for a vertically flipped image of the given pixel height: the
    /// camera-frame y axis is mirrored, so boxes, keypoints and the
    /// orientation are reflected accordingly.
    pub fn flipped_vertical(&self, height: f64) -> Self {
        let flip_box = |b: [f64; 4]| [b[0], 1.0 - b[1], b[2], b[3]];
        let flip_kp = |k: [f64; 3]| [k[0], height - k[1], k[2]];
        let q = self.q;
        Self {
            box_l: flip_box(self.box_l),
            box_r: flip_box(self.box_r),
            kp_l: flip_kp(self.kp_l),
            kp_r: flip_kp(self.kp_r),
            q: [q[0], -q[1], q[2], -q[3]],
            ..self.clone()
        }
    }
}
