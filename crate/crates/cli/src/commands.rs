use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use egotrack::calibration::TimeAlignOptions;
use egotrack::geometry::wrap_angle;
use egotrack::io::{read_json, read_jsonl, write_json, write_jsonl, TipCalRow, TrajRow};
use egotrack::labelgen::{clean_dataset, label_records, CleanReport, FrameRecord, LabelRow, LabeledSample};
use egotrack::metrics::{evaluate as eval_metrics, threshold_sweep, EvalConfig, FrameEval, PredictionRow};
use egotrack::pipeline::{
    assemble_records, calibrate as calibrate_streams, predict_from_head, CalibrateOptions, Calibration, DecodeOptions,
    MocapStream,
};
use egotrack::simulator::{
    oracle_predict, render_dataset, DropoutConfig, NoiseConfig, OraclePredictor, ScoreModel, SimCalibration, SimConfig,
};
use egotrack::ssdaf::{
    bin_width, build_target, decode_box, generate_anchors, write_targets, AnchorBox, BinCenter,
    EncodedTarget, FieldCodec, HeadRow, ModelConfig,
};
use egotrack::{Execution, Pose, Quaternion, StereoRig, TimedTrajectory};

use crate::require_files;

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(path).with_context(|| format!("reading {}", path.display()))
}

fn save_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_jsonl(path, rows).with_context(|| format!("writing {}", path.display()))
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value).with_context(|| format!("writing {}", path.display()))
}

fn load_rig(path: &Path) -> Result<StereoRig> {
    StereoRig::load(path).with_context(|| format!("reading rig {}", path.display()))
}

fn load_model(path: &Path) -> Result<ModelConfig> {
    ModelConfig::load(path).with_context(|| format!("reading schema {}", path.display()))
}

fn read_trajectory(path: &Path) -> Result<TimedTrajectory> {
    Ok(MocapStream::from_rows(&read_rows::<TrajRow>(path)?)
        .with_context(|| format!("trajectory {}", path.display()))?
        .traj)
}

fn read_mocap(path: &Path) -> Result<MocapStream> {
    MocapStream::from_rows(&read_rows::<TrajRow>(path)?).with_context(|| format!("trajectory {}", path.display()))
}

fn samples_from_rows(rows: &[LabelRow], rig: &StereoRig) -> Result<Vec<LabeledSample>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| r.to_sample(rig).with_context(|| format!("label row {} (frame {})", i + 1, r.frame_id)))
        .collect()
}

fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NoisePreset {
    /// Noise-free streams.
    None,
    /// Residual magnitudes measured on the reference rig.
    Reference,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Simulator config JSON; omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Recording length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Mocap clock minus camera clock, seconds.
    #[arg(long, allow_hyphen_values = true)]
    clock_offset: Option<f64>,
    #[arg(long, value_enum)]
    noise: Option<NoisePreset>,
    /// Tracking losses per second on the controller stream.
    #[arg(long)]
    dropout_rate: Option<f64>,
    /// Mean tracking-loss length in camera frames.
    #[arg(long)]
    dropout_gap: Option<f64>,
    /// Rig JSON; defaults to the built-in synthetic rig.
    #[arg(long)]
    rig: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    config: &'a SimConfig,
    truth: &'a SimCalibration,
    frames: usize,
    labels: usize,
    clean: CleanReport,
    files: BTreeMap<&'static str, &'static str>,
}

const FILES: [(&str, &str); 7] = [
    ("mocap_headset", "mocap_headset.jsonl"),
    ("mocap_controller", "mocap_controller.jsonl"),
    ("camera", "camera.jsonl"),
    ("tip_calib", "tip_calib.jsonl"),
    ("rig", "rig.json"),
    ("labels", "labels.jsonl"),
    ("manifest", "manifest.json"),
];

fn labelled(records: &[FrameRecord], rig: &StereoRig) -> (Vec<LabelRow>, CleanReport) {
    let (kept, report) = clean_dataset(records);
    let rows = label_records(&kept, rig, Execution::default()).into_iter().flatten().map(|s| LabelRow::from(&s)).collect();
    (rows, report)
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    require_files(a.config.iter().chain(&a.rig).map(PathBuf::as_path))?;
    let mut cfg: SimConfig = match &a.config {
        Some(p) => read_json(p).with_context(|| format!("reading config {}", p.display()))?,
        None => SimConfig::default(),
    };
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.duration = a.duration.unwrap_or(cfg.duration);
    cfg.clock_offset = a.clock_offset.unwrap_or(cfg.clock_offset);
    match a.noise {
        Some(NoisePreset::None) => cfg.noise = NoiseConfig::default(),
        Some(NoisePreset::Reference) => cfg.noise = NoiseConfig::reference_rig(),
        None => {}
    }
    cfg.dropout = DropoutConfig {
        rate: a.dropout_rate.unwrap_or(cfg.dropout.rate),
        mean_gap_frames: a.dropout_gap.unwrap_or(cfg.dropout.mean_gap_frames),
    };
    cfg.validate()?;
    let rig = match &a.rig {
        Some(p) => load_rig(p)?,
        None => StereoRig::synthetic_default(),
    };
    let truth = SimCalibration::default();
    let ds = render_dataset(&cfg, &truth)?;

    let out = &a.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let file = |key: &str| out.join(FILES.iter().find(|(k, _)| *k == key).expect("known file").1);
    let camera_rows = egotrack::io::rows_from_trajectory(&ds.camera, None);
    let tip_rows: Vec<TipCalRow> = ds
        .tip_calib
        .iter()
        .enumerate()
        .map(|(i, (cb, ct))| TipCalRow { t: i as f64 / cfg.mocap_rate, cb: cb.into(), ct: ct.into() })
        .collect();
    let (labels, clean) = labelled(&ds.records, &rig);

    save_jsonl(&file("mocap_headset"), &ds.mocap_headset.to_rows())?;
    save_jsonl(&file("mocap_controller"), &ds.mocap_controller.to_rows())?;
    save_jsonl(&file("camera"), &camera_rows)?;
    save_jsonl(&file("tip_calib"), &tip_rows)?;
    rig.save(file("rig")).context("writing rig.json")?;
    save_jsonl(&file("labels"), &labels)?;
    let manifest = Manifest {
        seed: cfg.seed,
        config: &cfg,
        truth: &truth,
        frames: ds.records.len(),
        labels: labels.len(),
        clean,
        files: FILES.into_iter().collect(),
    };
    save_json(&file("manifest"), &manifest)?;
    println!(
        "simulated {:.1} s (seed {}): {} mocap samples, {} camera frames, {} labels -> {}",
        cfg.duration,
        cfg.seed,
        ds.mocap_headset.traj.len(),
        ds.records.len(),
        labels.len(),
        out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Headset-constellation mocap trajectory (JSON lines).
    #[arg(long)]
    headset: PathBuf,
    /// Left-camera trajectory from the headset tracker (JSON lines).
    #[arg(long)]
    camera: PathBuf,
    /// Tip-calibration session (JSON lines of `{t, cb, ct}`).
    #[arg(long)]
    tip_calib: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Camera frames spanned by each relative motion.
    #[arg(long, default_value_t = 10)]
    stride: usize,
    /// Largest clock offset searched, seconds.
    #[arg(long, default_value_t = 0.5)]
    search_window: f64,
}

pub fn calibrate(a: CalibrateArgs) -> Result<()> {
    require_files([a.headset.as_path(), a.camera.as_path(), a.tip_calib.as_path()])?;
    ensure!(a.stride > 0, "stride must be positive");
    ensure!(a.search_window > 0.0, "search window must be positive");
    let headset = read_mocap(&a.headset)?;
    let camera = read_trajectory(&a.camera)?;
    let tips: Vec<(Pose, Pose)> =
        read_rows::<TipCalRow>(&a.tip_calib)?.into_iter().map(|r| (r.cb.into(), r.ct.into())).collect();
    let opts = CalibrateOptions {
        align: TimeAlignOptions { search_window: a.search_window, ..TimeAlignOptions::default() },
        stride: a.stride,
    };
    let cal = calibrate_streams(&headset, &camera, &tips, &opts)?;
    save_json(&a.out, &cal)?;
    println!("time offset      {:+.3} ms (peak correlation {:.4})", cal.time_offset_s * 1e3, cal.correlation_peak);
    println!(
        "hand-eye         {} pairs, rotation RMSE {:.4} deg, translation RMSE {:.3} mm",
        cal.n_pairs,
        deg(cal.rotation_rmse_rad),
        cal.translation_rmse_m * 1e3
    );
    let tip = Pose::from(cal.tip_offset);
    println!(
        "tip offset       {:.1} mm from the back constellation, {:.2} deg rotation",
        tip.translation.norm() * 1e3,
        deg(tip.rotation.angle())
    );
    Ok(())
}

#[derive(Args)]
pub struct LabelgenArgs {
    #[arg(long)]
    rig: PathBuf,
    /// Controller back-constellation mocap trajectory (JSON lines).
    #[arg(long, visible_alias = "controller")]
    traj: PathBuf,
    /// Headset-constellation mocap trajectory (JSON lines).
    #[arg(long)]
    headset: PathBuf,
    /// Left-camera trajectory from the headset tracker (JSON lines).
    #[arg(long)]
    camera: PathBuf,
    /// Calibration written by `calibrate`.
    #[arg(long)]
    calib: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Emit labels for vertically flipped images.
    #[arg(long)]
    flip_vertical: bool,
    /// Write the cleaning tallies as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct LabelgenReport {
    frames: usize,
    clean: CleanReport,
    not_visible: usize,
    labels: usize,
}

pub fn labelgen(a: LabelgenArgs) -> Result<()> {
    require_files([a.rig.as_path(), a.traj.as_path(), a.headset.as_path(), a.camera.as_path(), a.calib.as_path()])?;
    let rig = load_rig(&a.rig)?;
    let calib: Calibration = read_json(&a.calib).with_context(|| format!("reading {}", a.calib.display()))?;
    let controller = read_mocap(&a.traj)?;
    let headset = read_mocap(&a.headset)?;
    let camera = read_trajectory(&a.camera)?;
    let records = assemble_records(&camera, &headset, &controller, &calib)?;
    let (kept, clean) = clean_dataset(&records);
    let labelled = label_records(&kept, &rig, Execution::default());
    let not_visible = labelled.iter().filter(|r| r.is_err()).count();
    let mut rows: Vec<LabelRow> = labelled.into_iter().flatten().map(|s| LabelRow::from(&s)).collect();
    if a.flip_vertical {
        let h = rig.left.height as f64;
        rows = rows.iter().map(|r| r.flipped_vertical(h)).collect();
    }
    save_jsonl(&a.out, &rows)?;
    let report = LabelgenReport { frames: records.len(), clean, not_visible, labels: rows.len() };
    if let Some(p) = &a.report {
        save_json(p, &report)?;
    }
    println!(
        "{} frames: {} kept, {} missing mocap, {} reinitializing, {} out of range, {} hand not visible -> {} labels",
        report.frames, clean.kept, clean.dropped_missing, clean.dropped_reinit, clean.dropped_range, not_visible, report.labels
    );
    Ok(())
}

fn targets_for(codec: &FieldCodec, anchors: &[AnchorBox], samples: &[LabeledSample]) -> Result<Vec<EncodedTarget>> {
    Execution::default()
        .map(samples, |s| {
            let gt = match s.class_label {
                egotrack::labelgen::ClassLabel::RightHand => std::slice::from_ref(s),
                egotrack::labelgen::ClassLabel::Background => &[],
            };
            build_target(codec, anchors, gt, Execution::Sequential)
                .with_context(|| format!("encoding frame {}", s.record.frame_id))
        })
        .into_iter()
        .collect()
}

#[derive(Args)]
pub struct EncodeArgs {
    #[arg(long)]
    labels: PathBuf,
    /// Schema JSON (`variant`, `bins`, `axis`, `keypoints`, optional anchor `layers`).
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    rig: PathBuf,
    /// Binary target file; the layout sidecar is written next to it as `.json`.
    #[arg(long)]
    out: PathBuf,
}

pub fn encode(a: EncodeArgs) -> Result<()> {
    require_files([a.labels.as_path(), a.schema.as_path(), a.rig.as_path()])?;
    let model = load_model(&a.schema)?;
    let rig = load_rig(&a.rig)?;
    let samples = samples_from_rows(&read_rows(&a.labels)?, &rig)?;
    let anchors = generate_anchors(&model.anchors())?;
    let codec = FieldCodec::new(model.schema.clone(), rig);
    let targets = targets_for(&codec, &anchors, &samples)?;
    let layout = write_targets(&a.out, &model.schema, &targets).with_context(|| format!("writing {}", a.out.display()))?;
    let matched: usize = targets.iter().map(EncodedTarget::matched_count).sum();
    println!(
        "{} samples x {} anchors, {} floats per row ({} fields), {} matched anchors -> {}",
        layout.samples,
        layout.rows_per_sample,
        layout.row_len,
        codec.k(),
        matched,
        a.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct RoundtripArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    rig: PathBuf,
    /// Largest tolerated absolute error in any field.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the decoded top detection of every sample as prediction rows.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Quantization {
    max_error_deg: f64,
    half_width_deg: f64,
    within_half_width: bool,
}

#[derive(Debug, Serialize)]
struct RoundtripReport {
    schema: String,
    samples: usize,
    matched_anchors: usize,
    tolerance: f64,
    /// Worst absolute error per field, in pixels, meters, radians or probability.
    max_abs_error: BTreeMap<String, f64>,
    box_max_abs_error: f64,
    orientation_max_error_deg: Option<f64>,
    bin_quantization: Option<Quantization>,
    pass: bool,
}

fn quantization_error(q: &Quaternion, center: &BinCenter) -> f64 {
    let ypr = q.to_euler().ypr();
    match center {
        BinCenter::Full(e) => {
            let c = e.ypr();
            (0..3).map(|i| wrap_angle(ypr[i] - c[i]).abs()).fold(0.0, f64::max)
        }
        BinCenter::Axis { axis, angle } => wrap_angle(ypr[axis.index()] - angle).abs(),
    }
}

pub fn roundtrip(a: RoundtripArgs) -> Result<()> {
    require_files([a.labels.as_path(), a.schema.as_path(), a.rig.as_path()])?;
    let model = load_model(&a.schema)?;
    let rig = load_rig(&a.rig)?;
    let samples = samples_from_rows(&read_rows(&a.labels)?, &rig)?;
    let anchors = generate_anchors(&model.anchors())?;
    let codec = FieldCodec::new(model.schema.clone(), rig);
    let targets = targets_for(&codec, &anchors, &samples)?;

    let mut field_err = vec![0.0f64; codec.k()];
    let mut box_err = 0.0f64;
    let mut orient_err: Option<f64> = None;
    let mut quant_err: Option<f64> = None;
    let mut matched = 0;
    for (s, target) in samples.iter().zip(&targets) {
        for (row, anchor) in target.rows.iter().zip(&anchors).filter(|(r, _)| r.matched) {
            matched += 1;
            let want = codec.physical_values(s)?;
            let got = codec.decode_values(anchor, &row.fields)?;
            for (e, (w, g)) in field_err.iter_mut().zip(want.iter().zip(&got)) {
                *e = e.max((w - g).abs());
            }
            let b = decode_box(&row.offsets, anchor).to_array();
            let gt = s.box_left.to_array();
            box_err = (0..4).map(|i| (b[i] - gt[i]).abs()).fold(box_err, f64::max);
            let d = codec.decode(anchor, &row.fields)?;
            let truth = s.record.tip_in_camera.rotation;
            match d.bin {
                Some(bin) => {
                    quant_err = Some(quant_err.unwrap_or(0.0).max(quantization_error(&truth, &bin.center)));
                }
                None => {
                    if let Some(q) = d.orientation {
                        orient_err = Some(orient_err.unwrap_or(0.0).max(q.angle_to(&truth)));
                    }
                }
            }
        }
    }
    let max_field = field_err.iter().copied().fold(box_err, f64::max);
    let bin_quantization = match (codec.schema().binning(), quant_err) {
        (Some(scheme), Some(e)) => {
            let half = bin_width(&scheme)? / 2.0;
            Some(Quantization { max_error_deg: deg(e), half_width_deg: deg(half), within_half_width: e <= half + 1e-12 })
        }
        _ => None,
    };
    let pass = max_field <= a.tolerance && bin_quantization.as_ref().is_none_or(|q| q.within_half_width);
    let report = RoundtripReport {
        schema: model.schema.name().to_string(),
        samples: samples.len(),
        matched_anchors: matched,
        tolerance: a.tolerance,
        max_abs_error: model.schema.field_names().into_iter().zip(field_err.iter().copied()).collect(),
        box_max_abs_error: box_err,
        orientation_max_error_deg: orient_err.map(deg),
        bin_quantization,
        pass,
    };
    if let Some(p) = &a.out {
        save_json(p, &report)?;
    }
    if let Some(p) = &a.predictions {
        let preds = Execution::default()
            .map_range(samples.len(), |i| {
                let s = &samples[i];
                let head: Vec<HeadRow> = targets[i].rows.iter().map(HeadRow::from).collect();
                predict_from_head(&codec, &anchors, &head, s.record.timestamp, s.record.frame_id, &DecodeOptions::default())
            })
            .into_iter()
            .collect::<egotrack::Result<Vec<_>>>()?;
        save_jsonl(p, &preds.into_iter().flatten().collect::<Vec<_>>())?;
    }

    println!("{} on {} samples, {} matched anchors", report.schema, report.samples, report.matched_anchors);
    for (name, e) in model.schema.field_names().iter().zip(&field_err) {
        println!("  {name:<12} {e:.3e}");
    }
    println!("  {:<12} {box_err:.3e}", "box");
    if let Some(e) = report.orientation_max_error_deg {
        println!("  orientation  {e:.3e} deg");
    }
    if let Some(q) = &report.bin_quantization {
        println!("  bin quantization {:.3} deg (half width {:.3} deg)", q.max_error_deg, q.half_width_deg);
    }
    if !pass {
        bail!("round trip error {max_field:.3e} exceeds tolerance {:.1e} or bin quantization exceeds half width", a.tolerance);
    }
    println!("round trip ok");
    Ok(())
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    labels: PathBuf,
    /// Prediction rows: label rows plus `score`.
    #[arg(long)]
    predictions: PathBuf,
    /// Rig JSON; enables camera-space xyz errors.
    #[arg(long)]
    rig: Option<PathBuf>,
    /// Bin schema JSON; enables bin mAP from predicted `bin_scores`.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Confidence threshold.
    #[arg(long, default_value_t = egotrack::metrics::DEFAULT_SCORE_THRESH)]
    score_thresh: f64,
    /// Comma-separated IOU thresholds for precision.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.25,0.5")]
    iou: Vec<f64>,
    /// IOU threshold whose true positives feed the error statistics.
    #[arg(long, default_value_t = egotrack::metrics::DEFAULT_IOU_THRESH)]
    error_iou: f64,
    /// Comma-separated confidence thresholds for a precision sweep.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<f64>,
    /// Per-frame outcomes and errors as CSV (angles in degrees).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Metrics report JSON (angles in radians).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_frames_csv(path: &Path, frames: &[FrameEval]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "frame_id",
        "outcome",
        "iou",
        "score",
        "uv_err_px",
        "xyz_err_m",
        "yaw_err_deg",
        "pitch_err_deg",
        "roll_err_deg",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let opt_deg = |v: Option<f64>| opt(v.map(deg));
    for f in frames {
        let outcome = serde_json::to_value(f.outcome)?.as_str().unwrap_or_default().to_string();
        w.write_record([
            f.frame_id.to_string(),
            outcome,
            f.iou.to_string(),
            f.score.to_string(),
            opt(f.uv_err),
            opt(f.xyz_err),
            opt_deg(f.yaw_err),
            opt_deg(f.pitch_err),
            opt_deg(f.roll_err),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    require_files([a.labels.as_path(), a.predictions.as_path()].into_iter().chain(a.rig.as_deref()).chain(a.schema.as_deref()))?;
    let iou = a.iou.clone();
    ensure!(!iou.is_empty(), "at least one IOU threshold is required");
    let labels: Vec<LabelRow> = read_rows(&a.labels)?;
    let preds: Vec<PredictionRow> = read_rows(&a.predictions)?;
    let rig = a.rig.as_deref().map(load_rig).transpose()?;
    let binning = match &a.schema {
        Some(p) => {
            let m = load_model(p)?;
            Some(m.schema.binning().with_context(|| format!("{} is not a bin schema", m.schema.name()))?)
        }
        None => None,
    };
    let cfg = EvalConfig { score_thresh: a.score_thresh, iou_thresholds: iou, error_iou: a.error_iou, binning, ..EvalConfig::default() };
    let (report, frames) = eval_metrics(&labels, &preds, rig.as_ref(), &cfg)?;
    if let Some(p) = &a.out {
        save_json(p, &report)?;
    }
    if let Some(p) = &a.csv {
        write_frames_csv(p, &frames)?;
    }

    println!("{} labels, {} predictions, t_c = {}", labels.len(), preds.len(), report.score_thresh);
    for (t, p) in &report.map_at {
        let c = &report.counts[t];
        println!("  mAP@{t:<5} {p:.4}  (tp {} fp {} tn {} fn {})", c.tp, c.fp, c.tn, c.r#fn);
    }
    if let Some(s) = report.uv {
        println!("  uv   MAE {:.4} px  RMSE {:.4} px  (n = {})", s.mae, s.rmse, s.n);
    }
    if let Some(s) = report.xyz {
        println!("  xyz  MAE {:.4} m   RMSE {:.4} m   (n = {})", s.mae, s.rmse, s.n);
    }
    if let Some(o) = report.orientation {
        for (name, s) in [("yaw", o.yaw), ("pitch", o.pitch), ("roll", o.roll)] {
            println!("  {name:<5} MAE {:.4} deg  RMSE {:.4} deg", deg(s.mae), deg(s.rmse));
        }
    }
    if let Some(b) = report.bin_map {
        println!("  bin mAP {b:.4}");
    }
    for (t_c, p) in threshold_sweep(&labels, &preds, &a.sweep, a.error_iou)? {
        println!("  sweep t_c = {t_c:<8} precision {p:.4}");
    }
    Ok(())
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    rig: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-axis keypoint noise, pixels.
    #[arg(long, default_value_t = 0.0)]
    pixel_sigma: f64,
    /// Keypoint depth noise, meters.
    #[arg(long, default_value_t = 0.0)]
    depth_sigma: f64,
    /// Orientation noise angle, degrees.
    #[arg(long, default_value_t = 0.0)]
    orientation_sigma_deg: f64,
    /// Per-axis box noise, pixels.
    #[arg(long, default_value_t = 0.0)]
    box_sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    score: f64,
    /// Gaussian spread of the score around `--score`.
    #[arg(long, default_value_t = 0.0)]
    score_sigma: f64,
    /// Bin schema JSON; adds one-hot `bin_scores`.
    #[arg(long)]
    schema: Option<PathBuf>,
}

pub fn predict(a: PredictArgs) -> Result<()> {
    require_files([a.labels.as_path(), a.rig.as_path()].into_iter().chain(a.schema.as_deref()))?;
    let sigmas = [a.pixel_sigma, a.depth_sigma, a.orientation_sigma_deg, a.box_sigma, a.score_sigma];
    ensure!(sigmas.iter().all(|s| *s >= 0.0), "noise levels must be non-negative");
    let rig = load_rig(&a.rig)?;
    let labels: Vec<LabelRow> = read_rows(&a.labels)?;
    let binning = match &a.schema {
        Some(p) => Some(load_model(p)?.schema.binning().context("schema has no orientation bins")?),
        None => None,
    };
    let score = if a.score_sigma > 0.0 {
        ScoreModel::Noisy { mean: a.score, sigma: a.score_sigma }
    } else {
        ScoreModel::Constant { score: a.score }
    };
    let oracle = OraclePredictor {
        seed: a.seed,
        pixel_sigma: a.pixel_sigma,
        depth_sigma: a.depth_sigma,
        orientation_sigma: a.orientation_sigma_deg.to_radians(),
        box_sigma: a.box_sigma,
        score,
        binning,
    };
    let preds = oracle_predict(&labels, &oracle, &rig, Execution::default())?;
    save_jsonl(&a.out, &preds)?;
    println!("{} predictions -> {}", preds.len(), a.out.display());
    Ok(())
}
