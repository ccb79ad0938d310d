use egotrack::calibration::{time_align, TimeAlignOptions};
use egotrack::io::rows_from_trajectory;
use egotrack::labelgen::{label_record, label_records, FrameRecord, LabelRow};
use egotrack::metrics::{evaluate, EvalConfig};
use egotrack::simulator::{oracle_predict, render_dataset, NoiseConfig, OraclePredictor, SimCalibration, SimConfig};
use egotrack::ssdaf::{
    build_target, generate_anchors, match_anchors, AnchorBox, AnchorConfig, FieldCodec, FieldSchema, Variant,
};
use egotrack::{BBox, Execution, Pose, Quaternion, StereoRig};
use nalgebra::Vector3;
use proptest::prelude::*;

fn labels_for(seed: u64, duration: f64, rig: &StereoRig) -> Vec<LabelRow> {
    let ds = render_dataset(&SimConfig { seed, duration, ..SimConfig::default() }, &SimCalibration::default()).unwrap();
    label_records(&ds.records, rig, Execution::Parallel).into_iter().flatten().map(|s| LabelRow::from(&s)).collect()
}

#[test]
fn equal_seeds_give_byte_identical_streams() {
    let cfg = SimConfig {
        seed: 77,
        duration: 10.0,
        noise: NoiseConfig::reference_rig(),
        dropout: egotrack::simulator::DropoutConfig { rate: 0.3, mean_gap_frames: 4.0 },
        clock_offset: 0.05,
        ..SimConfig::default()
    };
    let dump = || {
        let ds = render_dataset(&cfg, &SimCalibration::default()).unwrap();
        let rows = rows_from_trajectory(&ds.mocap_controller.traj, Some(&ds.mocap_controller.valid));
        let labels: Vec<LabelRow> = ds
            .records
            .iter()
            .filter_map(|r| label_record(r, &StereoRig::synthetic_default()).ok())
            .map(|s| LabelRow::from(&s))
            .collect();
        (serde_json::to_string(&rows).unwrap(), serde_json::to_string(&labels).unwrap())
    };
    assert_eq!(dump(), dump());
}

#[test]
fn parallel_and_sequential_paths_agree() {
    let rig = StereoRig::synthetic_default();
    let ds = render_dataset(&SimConfig { seed: 8, duration: 5.0, ..SimConfig::default() }, &SimCalibration::default())
        .unwrap();
    let seq = label_records(&ds.records, &rig, Execution::Sequential);
    let par = label_records(&ds.records, &rig, Execution::Parallel);
    assert_eq!(format!("{seq:?}"), format!("{par:?}"));

    let anchors = generate_anchors(&AnchorConfig::default()).unwrap();
    let codec = FieldCodec::new(FieldSchema::new(Variant::AFQuat6D).unwrap(), rig);
    let samples: Vec<_> = seq.into_iter().flatten().take(20).collect();
    for s in &samples {
        let a = build_target(&codec, &anchors, std::slice::from_ref(s), Execution::Sequential).unwrap();
        let b = build_target(&codec, &anchors, std::slice::from_ref(s), Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}

fn mean_mae(labels: &[LabelRow], rig: &StereoRig, make: impl Fn(u64) -> OraclePredictor) -> (f64, f64, f64) {
    let (mut uv, mut xyz, mut yaw) = (0.0, 0.0, 0.0);
    for seed in 0..10 {
        let preds = oracle_predict(labels, &make(seed), rig, Execution::Parallel).unwrap();
        let (r, _) = evaluate(labels, &preds, Some(rig), &EvalConfig::default()).unwrap();
        uv += r.uv.unwrap().mae / 10.0;
        xyz += r.xyz.unwrap().mae / 10.0;
        yaw += r.orientation.unwrap().yaw.mae / 10.0;
    }
    (uv, xyz, yaw)
}

#[test]
fn increasing_noise_never_lowers_error() {
    let rig = StereoRig::synthetic_default();
    let labels = labels_for(12, 10.0, &rig);
    let mut last = (0.0, 0.0, 0.0);
    for level in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let m = mean_mae(&labels, &rig, |seed| OraclePredictor {
            seed,
            pixel_sigma: 2.0 * level,
            depth_sigma: 0.01 * level,
            orientation_sigma: 0.02 * level,
            ..OraclePredictor::default()
        });
        assert!(m.0 >= last.0 && m.1 >= last.1 && m.2 >= last.2, "{level}: {m:?} < {last:?}");
        last = m;
    }
}

#[test]
fn depth_noise_reaches_centimetre_scale_errors() {
    let rig = StereoRig::synthetic_default();
    let labels = labels_for(13, 20.0, &rig);
    let oracle = OraclePredictor { seed: 1, pixel_sigma: 3.0, depth_sigma: 0.042, ..OraclePredictor::default() };
    let preds = oracle_predict(&labels, &oracle, &rig, Execution::Parallel).unwrap();
    let (r, _) = evaluate(&labels, &preds, Some(&rig), &EvalConfig::default()).unwrap();
    let xyz = r.xyz.unwrap();
    assert!(xyz.mae > 0.025 && xyz.mae < 0.045, "{xyz:?}");
    assert!(xyz.rmse >= xyz.mae);
}

#[test]
fn time_alignment_survives_controller_grade_noise() {
    let cfg = SimConfig {
        seed: 21,
        duration: 60.0,
        clock_offset: 0.137,
        noise: NoiseConfig { rot_headset: NoiseConfig::reference_rig().rot_ctrl, ..NoiseConfig::default() },
        ..SimConfig::default()
    };
    let ds = render_dataset(&cfg, &SimCalibration::default()).unwrap();
    let a = time_align(&ds.mocap_headset.valid_trajectory().unwrap(), &ds.camera, &TimeAlignOptions::default())
        .unwrap();
    assert!((a.offset - 0.137).abs() < 5e-3, "{}", a.offset);
}

fn brute_force_match(gt: &[BBox], anchors: &[AnchorBox]) -> Vec<Option<usize>> {
    let mut out = vec![None; anchors.len()];
    for (i, a) in anchors.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gt.iter().enumerate() {
            let iou = a.bbox().iou(g);
            if iou > 0.5 && best.is_none_or(|(_, b)| iou > b) {
                best = Some((j, iou));
            }
        }
        out[i] = best.map(|(j, _)| j);
    }
    for (j, g) in gt.iter().enumerate() {
        let mut best = 0;
        for i in 1..anchors.len() {
            if anchors[i].bbox().iou(g) > anchors[best].bbox().iou(g) {
                best = i;
            }
        }
        out[best] = Some(j);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_box_matching_equals_brute_force(cx in 0.1f64..0.9, cy in 0.1f64..0.9, w in 0.02f64..0.6, h in 0.02f64..0.6) {
        let anchors = generate_anchors(&AnchorConfig::default()).unwrap();
        let gt = [BBox::new(cx, cy, w, h)];
        let m = match_anchors(&gt, &anchors, Execution::Parallel);
        prop_assert!(m.iter().any(|a| a.is_some()));
        prop_assert_eq!(m, brute_force_match(&gt, &anchors));
    }

    #[test]
    fn codec_round_trip_on_random_poses(
        rv in prop::array::uniform3(-0.8f64..0.8),
        x in -0.15f64..0.15, y in -0.1f64..0.15, z in 0.3f64..0.9,
        dx in -0.05f64..0.05, sw in 0.6f64..1.5,
    ) {
        let rig = StereoRig::synthetic_default();
        let tip = Pose::new(Quaternion::from_rotation_vector(&Vector3::from(rv)), Vector3::new(x, y, z));
        let rec = FrameRecord { timestamp: 0.0, frame_id: 0, image_refs: None, tip_in_camera: tip, camera_in_world: Pose::identity(), tracking_valid: true };
        let s = label_record(&rec, &rig).unwrap();
        let a = AnchorBox { x: s.box_left.cx + dx, y: s.box_left.cy - dx, w: (s.box_left.w * sw).min(1.0), h: (s.box_left.h / sw).min(1.0), layer: 0, cell: 0 };
        for v in [Variant::AFStereo3D, Variant::AFQuat6D, Variant::AFEuler6D] {
            let codec = FieldCodec::new(FieldSchema::new(v).unwrap(), rig.clone());
            let f = codec.encode(&a, Some(&s)).unwrap();
            let d = codec.decode(&a, &f).unwrap();
            let kl = d.keypoints_left[0];
            prop_assert!((kl.u - s.keypoint_left.u).abs() < 1e-10);
            prop_assert!((kl.v - s.keypoint_left.v).abs() < 1e-10);
            prop_assert!((kl.z.unwrap() - s.keypoint_left.z).abs() < 1e-12);
            if let Some(q) = d.orientation {
                prop_assert!(q.rotation_eq(&tip.rotation, 1e-9));
            }
        }
    }
}
