use nalgebra::Vector3;

use super::anchors::{encode_box, match_anchors, AnchorBox};
use super::binning::{bin_center, bin_orientation, BinCenter};
use super::keypoints::rigid_align;
use super::schema::{FieldSchema, Variant};
use crate::camera::StereoRig;
use crate::exec::Execution;
use crate::geometry::{EulerAngles, Pose, Quaternion};
use crate::labelgen::{Keypoint, LabeledSample};
use crate::{Error, Result};

/// Keypoint recovered from fields; `z` is absent for 2D-only schemas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedKeypoint {
    pub u: f64,
    pub v: f64,
    pub z: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedBin {
    pub index: usize,
    pub center: BinCenter,
}

/// Pose quantities recovered from one anchor's additional fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodedFields {
    pub keypoints_left: Vec<DecodedKeypoint>,
    pub keypoints_right: Vec<DecodedKeypoint>,
    pub quat_left: Option<Quaternion>,
    pub quat_right: Option<Quaternion>,
    pub euler_left: Option<EulerAngles>,
    pub euler_right: Option<EulerAngles>,
    pub bin: Option<DecodedBin>,
    /// Best available tip orientation in the left-camera frame.
    pub orientation: Option<Quaternion>,
    /// Rigid fit of the canonical keypoints (MultiPoint only).
    pub keypoint_pose: Option<Pose>,
}

impl DecodedFields {
    pub fn tip_left(&self) -> Option<DecodedKeypoint> {
        self.keypoints_left.first().copied()
    }
}

/// Encodes and decodes additional fields for one schema and rig.
///
/// Keypoints are normalized by image size, then offset against the anchor:
/// `t_u = (u − x_a)/w_a`, `t_v = (v − y_a)/h_a`, `t_z = P_z/h_a`.
/// Orientation fields are written raw; quaternions are canonicalized to
/// `w ≥ 0` and stored as `(qx, qy, qz, qw)`, Euler angles as
/// `(pitch, yaw, roll)`. Bin schemas emit a one-hot vector.
#[derive(Debug, Clone)]
pub struct FieldCodec {
    schema: FieldSchema,
    rig: StereoRig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    U(Side),
    V(Side),
    Z,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Left,
    Right,
}

fn kp_slots(side: Side, with_z: bool) -> impl Iterator<Item = Slot> {
    [Slot::U(side), Slot::V(side), Slot::Z].into_iter().take(if with_z { 3 } else { 2 })
}

fn push_kp(out: &mut Vec<f64>, kp: &Keypoint, with_z: bool) {
    out.extend([kp.u, kp.v, kp.z].into_iter().take(if with_z { 3 } else { 2 }));
}

fn read_kp(f: &[f64]) -> DecodedKeypoint {
    DecodedKeypoint { u: f[0], v: f[1], z: f.get(2).copied() }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, x)| if *x > acc.1 { (i, *x) } else { acc })
        .0
}

impl FieldCodec {
    pub fn new(schema: FieldSchema, rig: StereoRig) -> Self {
        Self { schema, rig }
    }

    pub fn schema(&self) -> &FieldSchema {
        &self.schema
    }

    pub fn rig(&self) -> &StereoRig {
        &self.rig
    }

    pub fn k(&self) -> usize {
        self.schema.k()
    }

    fn slots(&self) -> Vec<Slot> {
        let raw = |n: usize| std::iter::repeat_n(Slot::Raw, n);
        match self.schema.variant() {
            Variant::AF2D => kp_slots(Side::Left, false).collect(),
            Variant::AF3D => kp_slots(Side::Left, true).collect(),
            Variant::AFStereo3D => kp_slots(Side::Left, true).chain(kp_slots(Side::Right, true)).collect(),
            Variant::AFQuat6D | Variant::AFEuler6D => {
                let n = if matches!(self.schema.variant(), Variant::AFQuat6D) { 4 } else { 3 };
                kp_slots(Side::Left, true).chain(raw(n)).chain(kp_slots(Side::Right, true)).chain(raw(n)).collect()
            }
            Variant::AFBinned { bins } => raw(*bins).collect(),
            Variant::AF3DBinned { bins } | Variant::AxisBinned { bins, .. } => {
                kp_slots(Side::Left, true).chain(raw(*bins)).collect()
            }
            Variant::MultiPoint { keypoints } => {
                let n = keypoints.len();
                (0..n).flat_map(|_| kp_slots(Side::Left, true)).chain((0..n).flat_map(|_| kp_slots(Side::Right, true))).collect()
            }
        }
    }

    fn image_size(&self, side: Side) -> (f64, f64) {
        let cam = match side {
            Side::Left => &self.rig.left,
            Side::Right => &self.rig.right,
        };
        (cam.width as f64, cam.height as f64)
    }

    /// Tip rotation in the left and right camera frames.
    fn orientations(&self, s: &LabeledSample) -> (Quaternion, Quaternion) {
        let left = s.record.tip_in_camera.rotation;
        let right = self.rig.left_to_right.rotation.inverse() * left;
        (left.canonical(), right.canonical())
    }

    fn multipoint_keypoints(&self, s: &LabeledSample, canonical: &[Vector3<f64>]) -> Result<(Vec<Keypoint>, Vec<Keypoint>)> {
        let mut left = Vec::with_capacity(canonical.len());
        let mut right = Vec::with_capacity(canonical.len());
        for c in canonical {
            let p = s.record.tip_in_camera.transform_point(c);
            left.push(Keypoint::observe(&self.rig.left, &p)?);
            right.push(Keypoint::observe(&self.rig.right, &self.rig.left_to_right_point(&p))?);
        }
        Ok((left, right))
    }

    /// Field quantities before anchor encoding, in field order: keypoints in
    /// pixels and meters, orientations and one-hot bins as encoded.
    pub fn physical_values(&self, s: &LabeledSample) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.k());
        let one_hot = |out: &mut Vec<f64>| -> Result<()> {
            let scheme = self.schema.binning().expect("bin schema");
            let idx = bin_orientation(&s.record.tip_in_camera.rotation, &scheme)?;
            out.extend((0..scheme.bins()).map(|i| if i == idx { 1.0 } else { 0.0 }));
            Ok(())
        };
        match self.schema.variant() {
            Variant::AF2D => push_kp(&mut out, &s.keypoint_left, false),
            Variant::AF3D => push_kp(&mut out, &s.keypoint_left, true),
            Variant::AFStereo3D => {
                push_kp(&mut out, &s.keypoint_left, true);
                push_kp(&mut out, &s.keypoint_right, true);
            }
            Variant::AFQuat6D => {
                let (ql, qr) = self.orientations(s);
                for (kp, q) in [(&s.keypoint_left, ql), (&s.keypoint_right, qr)] {
                    push_kp(&mut out, kp, true);
                    out.extend([q.x, q.y, q.z, q.w]);
                }
            }
            Variant::AFEuler6D => {
                let (ql, qr) = self.orientations(s);
                for (kp, q) in [(&s.keypoint_left, ql), (&s.keypoint_right, qr)] {
                    push_kp(&mut out, kp, true);
                    let e = q.to_euler();
                    out.extend([e.pitch, e.yaw, e.roll]);
                }
            }
            Variant::AFBinned { .. } => one_hot(&mut out)?,
            Variant::AF3DBinned { .. } | Variant::AxisBinned { .. } => {
                push_kp(&mut out, &s.keypoint_left, true);
                one_hot(&mut out)?;
            }
            Variant::MultiPoint { keypoints } => {
                let (kl, kr) = self.multipoint_keypoints(s, keypoints)?;
                for kp in kl.iter().chain(&kr) {
                    push_kp(&mut out, kp, true);
                }
            }
        }
        debug_assert_eq!(out.len(), self.k());
        Ok(out)
    }

    /// Field targets for an anchor matched to `sample`.
    pub fn encode(&self, anchor: &AnchorBox, sample: Option<&LabeledSample>) -> Result<Vec<f64>> {
        let s = sample.ok_or(Error::UnmatchedAnchor)?;
        let values = self.physical_values(s)?;
        Ok(self
            .slots()
            .iter()
            .zip(values)
            .map(|(slot, x)| match *slot {
                Slot::U(side) => (x / self.image_size(side).0 - anchor.x) / anchor.w,
                Slot::V(side) => (x / self.image_size(side).1 - anchor.y) / anchor.h,
                Slot::Z => x / anchor.h,
                Slot::Raw => x,
            })
            .collect())
    }

    /// Undoes the anchor encoding, giving values laid out as [`FieldCodec::physical_values`].
    pub fn decode_values(&self, anchor: &AnchorBox, fields: &[f64]) -> Result<Vec<f64>> {
        if fields.len() != self.k() {
            return Err(Error::FieldLengthMismatch { expected: self.k(), got: fields.len() });
        }
        Ok(self
            .slots()
            .iter()
            .zip(fields)
            .map(|(slot, t)| match *slot {
                Slot::U(side) => (t * anchor.w + anchor.x) * self.image_size(side).0,
                Slot::V(side) => (t * anchor.h + anchor.y) * self.image_size(side).1,
                Slot::Z => t * anchor.h,
                Slot::Raw => *t,
            })
            .collect())
    }

    /// Inverse of [`FieldCodec::encode`]. Bin fields decode to the argmax bin
    /// and its cell center.
    pub fn decode(&self, anchor: &AnchorBox, fields: &[f64]) -> Result<DecodedFields> {
        let f = self.decode_values(anchor, fields)?;
        let mut d = DecodedFields::default();
        let decode_bin = |f: &[f64]| -> Result<DecodedBin> {
            let scheme = self.schema.binning().expect("bin schema");
            let index = argmax(f);
            Ok(DecodedBin { index, center: bin_center(&scheme, index)? })
        };
        match self.schema.variant() {
            Variant::AF2D | Variant::AF3D => d.keypoints_left.push(read_kp(&f)),
            Variant::AFStereo3D => {
                d.keypoints_left.push(read_kp(&f[0..3]));
                d.keypoints_right.push(read_kp(&f[3..6]));
            }
            Variant::AFQuat6D => {
                let q = |f: &[f64]| Quaternion::new(f[3], f[0], f[1], f[2]).canonical();
                d.keypoints_left.push(read_kp(&f[0..3]));
                d.keypoints_right.push(read_kp(&f[7..10]));
                d.quat_left = Some(q(&f[3..7]));
                d.quat_right = Some(q(&f[10..14]));
                d.orientation = d.quat_left;
            }
            Variant::AFEuler6D => {
                let e = |f: &[f64]| EulerAngles { pitch: f[0], yaw: f[1], roll: f[2] };
                d.keypoints_left.push(read_kp(&f[0..3]));
                d.keypoints_right.push(read_kp(&f[6..9]));
                d.euler_left = Some(e(&f[3..6]));
                d.euler_right = Some(e(&f[9..12]));
                d.orientation = d.euler_left.map(|e| Quaternion::from_euler(&e));
            }
            Variant::AFBinned { .. } => d.bin = Some(decode_bin(&f)?),
            Variant::AF3DBinned { .. } | Variant::AxisBinned { .. } => {
                d.keypoints_left.push(read_kp(&f[0..3]));
                d.bin = Some(decode_bin(&f[3..])?);
            }
            Variant::MultiPoint { keypoints } => {
                let n = keypoints.len();
                for i in 0..n {
                    d.keypoints_left.push(read_kp(&f[3 * i..3 * i + 3]));
                    d.keypoints_right.push(read_kp(&f[3 * (n + i)..3 * (n + i) + 3]));
                }
                let pts = d
                    .keypoints_left
                    .iter()
                    .map(|k| Keypoint { u: k.u, v: k.v, z: k.z.unwrap_or(0.0) }.point(&self.rig.left))
                    .collect::<Result<Vec<_>>>()?;
                let pose = rigid_align(&pts, keypoints)?;
                d.orientation = Some(pose.rotation);
                d.keypoint_pose = Some(pose);
            }
        }
        if let Some(DecodedBin { center: BinCenter::Full(e), .. }) = d.bin {
            d.orientation = Some(Quaternion::from_euler(&e));
        }
        Ok(d)
    }
}

/// Per-anchor training target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetRow {
    pub offsets: [f64; 4],
    pub fields: Vec<f64>,
    /// 1 for the hand class, 0 for background.
    pub class: f64,
    pub matched: bool,
}

/// Targets for every anchor of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTarget {
    pub rows: Vec<TargetRow>,
    pub k: usize,
}

impl EncodedTarget {
    pub fn matched_count(&self) -> usize {
        self.rows.iter().filter(|r| r.matched).count()
    }
}

/// Matches the samples' left boxes to anchors and encodes every matched anchor.
/// Unmatched anchors carry zero offsets/fields and background class.
pub fn build_target(
    codec: &FieldCodec,
    anchors: &[AnchorBox],
    samples: &[LabeledSample],
    exec: Execution,
) -> Result<EncodedTarget> {
    let gt: Vec<_> = samples.iter().map(|s| s.box_left).collect();
    let assignment = match_anchors(&gt, anchors, exec);
    let k = codec.k();
    let rows = exec.map_range(anchors.len(), |i| -> Result<TargetRow> {
        let a = &anchors[i];
        Ok(match assignment[i] {
            Some(j) => TargetRow {
                offsets: encode_box(&samples[j].box_left, a),
                fields: codec.encode(a, Some(&samples[j]))?,
                class: 1.0,
                matched: true,
            },
            None => TargetRow { offsets: [0.0; 4], fields: vec![0.0; k], class: 0.0, matched: false },
        })
    });
    Ok(EncodedTarget { rows: rows.into_iter().collect::<Result<_>>()?, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::labelgen::{label_record, FrameRecord};
    use crate::ssdaf::{default_multipoint_keypoints, generate_anchors, AnchorConfig, EulerAxis};

    fn sample(tip: Pose) -> LabeledSample {
        let rec = FrameRecord {
            timestamp: 0.0,
            frame_id: 0,
            image_refs: None,
            tip_in_camera: tip,
            camera_in_world: Pose::identity(),
            tracking_valid: true,
        };
        label_record(&rec, &StereoRig::synthetic_default()).unwrap()
    }

    fn anchor(x: f64, y: f64, w: f64, h: f64) -> AnchorBox {
        AnchorBox { x, y, w, h, layer: 0, cell: 0 }
    }

    fn codec(v: Variant) -> FieldCodec {
        FieldCodec::new(FieldSchema::new(v).unwrap(), StereoRig::synthetic_default())
    }

    #[test]
    fn keypoint_at_anchor_center_encodes_to_unit_depth() {
        let c = codec(Variant::AF3D);
        let mut s = sample(Pose::from_translation(0.0, 0.0, 0.2));
        s.keypoint_left = Keypoint { u: 320.0, v: 240.0, z: 0.2 };
        let f = c.encode(&anchor(0.5, 0.5, 0.3, 0.2), Some(&s)).unwrap();
        assert_eq!(f, vec![0.0, 0.0, 1.0]);
        let d = c.decode(&anchor(0.5, 0.5, 0.3, 0.2), &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(d.keypoints_left, vec![DecodedKeypoint { u: 320.0, v: 240.0, z: Some(0.2) }]);
    }

    #[test]
    fn hand_evaluated_offsets() {
        let c = codec(Variant::AF3D);
        let mut s = sample(Pose::from_translation(0.0, 0.0, 0.4));
        s.keypoint_left = Keypoint { u: 0.54 * 640.0, v: 0.46 * 480.0, z: 0.4 };
        let f = c.encode(&anchor(0.5, 0.5, 0.2, 0.2), Some(&s)).unwrap();
        for (a, b) in f.iter().zip([0.2, -0.2, 2.0]) {
            assert!((a - b).abs() < 1e-12, "{f:?}");
        }
    }

    #[test]
    fn unmatched_anchor_and_bad_length_are_errors() {
        let c = codec(Variant::AF2D);
        assert!(matches!(c.encode(&anchor(0.5, 0.5, 0.2, 0.2), None), Err(Error::UnmatchedAnchor)));
        assert!(matches!(
            c.decode(&anchor(0.5, 0.5, 0.2, 0.2), &[0.0; 3]),
            Err(Error::FieldLengthMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn one_hot_bin_decodes_to_its_center() {
        let c = codec(Variant::AFBinned { bins: 27 });
        let mut f = vec![0.0; 27];
        f[13] = 1.0;
        let d = c.decode(&anchor(0.5, 0.5, 0.2, 0.2), &f).unwrap();
        assert_eq!(d.bin.unwrap().index, 13);
        assert!(d.orientation.unwrap().rotation_eq(&Quaternion::identity(), 1e-15));

        let s = sample(Pose::new(Quaternion::new(0.95, 0.1, -0.2, 0.15), Vector3::new(0.05, 0.1, 0.5)));
        let enc = codec(Variant::AxisBinned { axis: EulerAxis::Roll, bins: 20 })
            .encode(&anchor(0.5, 0.5, 0.2, 0.2), Some(&s))
            .unwrap();
        assert_eq!(enc.len(), 23);
        assert_eq!(enc[3..].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn multipoint_decodes_pose() {
        let tip = Pose::new(Quaternion::new(0.9, 0.2, -0.1, 0.3), Vector3::new(0.05, 0.12, 0.45));
        let s = sample(tip);
        let c = codec(Variant::MultiPoint { keypoints: default_multipoint_keypoints() });
        let a = anchor(0.55, 0.65, 0.2, 0.25);
        let d = c.decode(&a, &c.encode(&a, Some(&s)).unwrap()).unwrap();
        assert_eq!(d.keypoints_left.len(), 4);
        let pose = d.keypoint_pose.unwrap();
        assert!(pose.rotation.rotation_eq(&tip.rotation, 1e-9));
        assert!((pose.translation - tip.translation).norm() < 1e-9);
    }

    #[test]
    fn target_marks_matched_anchors() {
        let anchors = generate_anchors(&AnchorConfig::default()).unwrap();
        let s = sample(Pose::from_translation(0.1, 0.15, 0.4));
        let c = codec(Variant::AFStereo3D);
        let t = build_target(&c, &anchors, std::slice::from_ref(&s), Execution::Parallel).unwrap();
        assert_eq!(t.rows.len(), anchors.len());
        assert!(t.matched_count() >= 1);
        for r in &t.rows {
            assert_eq!(r.fields.len(), 6);
            assert_eq!(r.class, if r.matched { 1.0 } else { 0.0 });
            if !r.matched {
                assert!(r.fields.iter().all(|x| *x == 0.0));
            }
        }
        let seq = build_target(&c, &anchors, std::slice::from_ref(&s), Execution::Sequential).unwrap();
        assert_eq!(seq, t);
        let empty = build_target(&c, &anchors, &[], Execution::Sequential).unwrap();
        assert_eq!(empty.matched_count(), 0);
    }
}
