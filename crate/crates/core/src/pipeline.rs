//! Glue between raw streams and labels: calibrate the rig from a recording,
//! then pair camera frames with mocap samples to build frame records.

use serde::{Deserialize, Serialize};

use crate::calibration::{hand_eye_solve, motion_pairs, time_align, tip_calibrate, TimeAlignOptions};
use crate::camera::PoseJson;
use crate::geometry::{tip_pose_in_camera, Pose, TimedTrajectory};
use crate::io::{trajectory_from_rows, TrajRow};
use crate::labelgen::{ClassLabel, FrameRecord, Keypoint};
use crate::metrics::PredictionRow;
use crate::ssdaf::{decode_detections, nms_select, AnchorBox, FieldCodec, HeadRow};
use crate::{Error, Result};

/// Mocap stream with per-sample tracking flags.
#[derive(Debug, Clone, PartialEq)]
pub struct MocapStream {
    pub traj: TimedTrajectory,
    pub valid: Vec<bool>,
}

impl MocapStream {
    pub fn all_valid(traj: TimedTrajectory) -> Self {
        let valid = vec![true; traj.len()];
        Self { traj, valid }
    }

    pub fn from_rows(rows: &[TrajRow]) -> Result<Self> {
        let (traj, valid) = trajectory_from_rows(rows)?;
        Ok(Self { traj, valid })
    }

    pub fn to_rows(&self) -> Vec<TrajRow> {
        crate::io::rows_from_trajectory(&self.traj, Some(&self.valid))
    }

    /// Valid samples only.
    pub fn valid_trajectory(&self) -> Result<TimedTrajectory> {
        let samples =
            self.traj.samples().iter().zip(&self.valid).filter(|(_, v)| **v).map(|(s, _)| *s).collect();
        TimedTrajectory::new(samples, self.traj.rate_hz())
    }

    /// Index of the sample within half a sample period of `t`.
    pub fn sample_at(&self, t: f64) -> Option<usize> {
        let i = self.traj.nearest_index(t)?;
        let half = 0.5 / self.traj.rate_hz() + 1e-9;
        ((self.traj.samples()[i].t - t).abs() <= half).then_some(i)
    }
}

/// Calibration file contents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Left-camera pose in the headset-constellation frame.
    pub hand_eye: PoseJson,
    pub rotation_rmse_rad: f64,
    pub translation_rmse_m: f64,
    pub n_pairs: usize,
    /// `t_mocap = t_camera + time_offset_s`.
    pub time_offset_s: f64,
    pub correlation_peak: f64,
    /// Tip pose in the controller back-constellation frame.
    pub tip_offset: PoseJson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrateOptions {
    pub align: TimeAlignOptions,
    /// Camera frames between the two ends of each relative motion.
    pub stride: usize,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        Self { align: TimeAlignOptions::default(), stride: 10 }
    }
}

/// Aligns clocks, solves hand-eye from headset/camera motion, and averages
/// the tip offset.
pub fn calibrate(
    headset: &MocapStream,
    camera: &TimedTrajectory,
    tip_samples: &[(Pose, Pose)],
    opts: &CalibrateOptions,
) -> Result<Calibration> {
    let align = time_align(&headset.valid_trajectory()?, camera, &opts.align)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for s in camera.samples() {
        if let Some(i) = headset.sample_at(s.t + align.offset).filter(|i| headset.valid[*i]) {
            a.push(headset.traj.samples()[i].pose);
            b.push(s.pose);
        }
    }
    let he = hand_eye_solve(&motion_pairs(&a, &b, opts.stride)?)?;
    let tip = tip_calibrate(tip_samples)?;
    Ok(Calibration {
        hand_eye: he.x.into(),
        rotation_rmse_rad: he.rotation_rmse,
        translation_rmse_m: he.translation_rmse,
        n_pairs: he.n_pairs,
        time_offset_s: align.offset,
        correlation_peak: align.correlation_peak,
        tip_offset: tip.into(),
    })
}

/// Frame records for every camera frame with mocap coverage. A frame is
/// tracking-valid when both constellations are valid at the paired sample.
pub fn assemble_records(
    camera: &TimedTrajectory,
    headset: &MocapStream,
    controller: &MocapStream,
    calib: &Calibration,
) -> Result<Vec<FrameRecord>> {
    if headset.traj.is_empty() || controller.traj.is_empty() {
        return Err(Error::NoSamples);
    }
    let x: Pose = calib.hand_eye.into();
    let tip: Pose = calib.tip_offset.into();
    let mut out = Vec::with_capacity(camera.len());
    for (k, s) in camera.samples().iter().enumerate() {
        let t = s.t + calib.time_offset_s;
        let (Some(h), Some(c)) = (headset.sample_at(t), controller.sample_at(t)) else {
            continue;
        };
        let head = headset.traj.samples()[h].pose;
        let back = controller.traj.samples()[c].pose;
        out.push(FrameRecord {
            timestamp: s.t,
            frame_id: k as u64,
            image_refs: None,
            tip_in_camera: tip_pose_in_camera(&x, &head, &back, &tip),
            camera_in_world: s.pose,
            tracking_valid: headset.valid[h] && controller.valid[c],
        });
    }
    Ok(out)
}

/// Detection settings for turning head outputs into one prediction per image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    pub min_score: f64,
    pub nms_iou: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self { min_score: 0.5, nms_iou: 0.5 }
    }
}

/// Top-scoring detection after NMS, decoded into a prediction row. Returns
/// `None` when nothing scores above `min_score`.
pub fn predict_from_head(
    codec: &FieldCodec,
    anchors: &[AnchorBox],
    head: &[HeadRow],
    t: f64,
    frame_id: u64,
    opts: &DecodeOptions,
) -> Result<Option<PredictionRow>> {
    if head.len() != anchors.len() {
        return Err(Error::ShapeMismatch(format!("{} head rows for {} anchors", head.len(), anchors.len())));
    }
    let Some(det) = nms_select(&decode_detections(anchors, head, opts.min_score), opts.nms_iou, 1).pop() else {
        return Ok(None);
    };
    let d = codec.decode(&anchors[det.anchor], &det.fields)?;
    let rig = codec.rig();
    let (kp_l, kp_r) = match d.keypoint_pose {
        Some(pose) => {
            let p = pose.translation;
            let l = Keypoint::observe(&rig.left, &p)?;
            let r = Keypoint::observe(&rig.right, &rig.left_to_right_point(&p))?;
            (Some(l.to_array().to_vec()), Some(r.to_array().to_vec()))
        }
        None => {
            let kp = |k: &crate::ssdaf::DecodedKeypoint| [k.u, k.v].into_iter().chain(k.z).collect::<Vec<_>>();
            (d.keypoints_left.first().map(kp), d.keypoints_right.first().map(kp))
        }
    };
    let bin_scores = codec.schema().categorical_range().map(|r| det.fields[r].to_vec());
    Ok(Some(PredictionRow {
        t,
        frame_id,
        box_l: det.bbox.to_array(),
        box_r: None,
        kp_l,
        kp_r,
        q: d.orientation.map(|q| q.to_array()),
        label: ClassLabel::RightHand,
        score: det.class_score,
        bin_scores,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelgen::{label_record, LabelRow};
    use crate::simulator::{render_dataset, SimCalibration, SimConfig};
    use crate::ssdaf::{build_target, generate_anchors, AnchorConfig, FieldSchema, Variant};
    use crate::{Execution, StereoRig};

    #[test]
    fn noiseless_recording_recovers_everything() {
        let cfg = SimConfig { seed: 3, duration: 20.0, clock_offset: 0.137, ..SimConfig::default() };
        let truth = SimCalibration::default();
        let ds = render_dataset(&cfg, &truth).unwrap();
        let cal = calibrate(&ds.mocap_headset, &ds.camera, &ds.tip_calib, &CalibrateOptions::default()).unwrap();
        assert!((cal.time_offset_s - 0.137).abs() < 1e-3, "{}", cal.time_offset_s);
        let (dr, dt) = Pose::from(cal.hand_eye).distance(&truth.hand_eye);
        assert!(dr < 1e-8 && dt < 1e-9, "{dr} {dt}");
        let recs = assemble_records(&ds.camera, &ds.mocap_headset, &ds.mocap_controller, &cal).unwrap();
        assert!(recs.len() + 5 >= ds.records.len());
        for r in &recs {
            let truth = &ds.records[r.frame_id as usize];
            let (dr, dt) = r.tip_in_camera.distance(&truth.tip_in_camera);
            assert!(dr < 1e-9 && dt < 1e-9);
        }
    }

    #[test]
    fn perfect_head_decodes_to_the_label() {
        let rig = StereoRig::synthetic_default();
        let ds = render_dataset(&SimConfig { seed: 4, duration: 2.0, ..SimConfig::default() }, &SimCalibration::default())
            .unwrap();
        let anchors = generate_anchors(&AnchorConfig::default()).unwrap();
        let s = ds.records.iter().find_map(|r| label_record(r, &rig).ok()).unwrap();
        let want = LabelRow::from(&s);
        for v in [Variant::AFQuat6D, Variant::MultiPoint { keypoints: crate::ssdaf::default_multipoint_keypoints() }] {
            let codec = FieldCodec::new(FieldSchema::new(v).unwrap(), rig.clone());
            let target = build_target(&codec, &anchors, std::slice::from_ref(&s), Execution::Sequential).unwrap();
            let head: Vec<HeadRow> = target.rows.iter().map(HeadRow::from).collect();
            let p = predict_from_head(&codec, &anchors, &head, s.record.timestamp, 9, &DecodeOptions::default())
                .unwrap()
                .unwrap();
            assert_eq!(p.frame_id, 9);
            for (a, b) in p.kp_l.unwrap().iter().zip(want.kp_l) {
                assert!((a - b).abs() < 1e-9, "{a} {b}");
            }
            for (a, b) in p.box_l.iter().zip(want.box_l) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(crate::Quaternion::from_array(p.q.unwrap()).rotation_eq(&s.record.tip_in_camera.rotation, 1e-9));
        }
        let empty = vec![HeadRow { offsets: [0.0; 4], fields: vec![0.0; 14], class_prob: 0.1 }; anchors.len()];
        let codec = FieldCodec::new(FieldSchema::new(Variant::AFQuat6D).unwrap(), rig);
        assert!(predict_from_head(&codec, &anchors, &empty, 0.0, 0, &DecodeOptions::default()).unwrap().is_none());
    }
}
