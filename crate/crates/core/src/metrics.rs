//! Detection and pose evaluation.
//!
//! A frame is classified against its groundtruth with a confidence threshold
//! `t_c` and an IOU threshold `t_iou`; precision is `tp / (tp + fp)`. Pose
//! errors are aggregated over true positives only.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

use crate::bbox::BBox;
use crate::camera::StereoRig;
use crate::exec::Execution;
use crate::geometry::{wrap_angle, Quaternion};
use crate::labelgen::{ClassLabel, LabelRow};
use crate::ssdaf::{bin_orientation, OrientationBinning};
use crate::{Error, Result};

pub const DEFAULT_SCORE_THRESH: f64 = 1e-4;
pub const DEFAULT_IOU_THRESH: f64 = 0.05;
pub const REPORT_IOU_THRESHOLDS: [f64; 3] = [0.05, 0.25, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionOutcome {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

/// Classifies one frame. A missing prediction counts as score 0.
pub fn classify_detection(gt: Option<&BBox>, pred: Option<(&BBox, f64)>, t_c: f64, t_iou: f64) -> DetectionOutcome {
    let score = pred.map_or(0.0, |(_, s)| s);
    match gt {
        None if score < t_c => DetectionOutcome::TrueNegative,
        Some(g) => match pred {
            Some((b, s)) if s > t_c && g.iou(b) > t_iou => DetectionOutcome::TruePositive,
            _ if score < t_c => DetectionOutcome::FalseNegative,
            _ => DetectionOutcome::FalsePositive,
        },
        None => DetectionOutcome::FalsePositive,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl OutcomeCounts {
    pub fn from_outcomes(outcomes: &[DetectionOutcome]) -> Self {
        let mut c = Self::default();
        for o in outcomes {
            match o {
                DetectionOutcome::TruePositive => c.tp += 1,
                DetectionOutcome::FalsePositive => c.fp += 1,
                DetectionOutcome::TrueNegative => c.tn += 1,
                DetectionOutcome::FalseNegative => c.r#fn += 1,
            }
        }
        c
    }

    /// `tp / (tp + fp)`, or 1.0 when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }
}

pub fn precision(outcomes: &[DetectionOutcome]) -> f64 {
    OutcomeCounts::from_outcomes(outcomes).precision()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

impl ErrorStats {
    /// MAE and RMSE of non-negative error magnitudes.
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::NoTruePositives);
        }
        let n = errors.len() as f64;
        let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
        let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        Ok(Self { mae, rmse, n: errors.len() })
    }
}

/// Euclidean pixel error per pair.
pub fn uv_errors(pairs: &[(Vector2<f64>, Vector2<f64>)]) -> Result<ErrorStats> {
    ErrorStats::from_errors(&pairs.iter().map(|(g, p)| (g - p).norm()).collect::<Vec<_>>())
}

/// Euclidean metric error per pair.
pub fn xyz_errors(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Result<ErrorStats> {
    ErrorStats::from_errors(&pairs.iter().map(|(g, p)| (g - p).norm()).collect::<Vec<_>>())
}

/// Per-axis absolute Euler differences, wrapped to `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationStats {
    pub yaw: ErrorStats,
    pub pitch: ErrorStats,
    pub roll: ErrorStats,
}

fn euler_diff(gt: &Quaternion, pred: &Quaternion) -> [f64; 3] {
    let (g, p) = (gt.to_euler().ypr(), pred.to_euler().ypr());
    [0, 1, 2].map(|i| wrap_angle(p[i] - g[i]).abs())
}

pub fn orientation_errors(pairs: &[(Quaternion, Quaternion)]) -> Result<OrientationStats> {
    let diffs: Vec<[f64; 3]> = pairs.iter().map(|(g, p)| euler_diff(g, p)).collect();
    let axis = |i: usize| ErrorStats::from_errors(&diffs.iter().map(|d| d[i]).collect::<Vec<_>>());
    Ok(OrientationStats { yaw: axis(0)?, pitch: axis(1)?, roll: axis(2)? })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose highest-scoring bin is the groundtruth bin.
pub fn bin_map(samples: &[(usize, &[f64])]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoTruePositives);
    }
    let hits = samples.iter().filter(|(gt, scores)| argmax(scores) == *gt).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// One line of a prediction file. A label row with an added `score` is a
/// valid prediction row; pose fields a schema does not produce may be
/// omitted, and `kp_l`/`kp_r` may carry only `[u, v]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub t: f64,
    pub frame_id: u64,
    pub box_l: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_r: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kp_l: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kp_r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<[f64; 4]>,
    pub label: ClassLabel,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_scores: Option<Vec<f64>>,
}

impl PredictionRow {
    /// Groundtruth echoed back as a prediction with the given score.
    pub fn from_label(row: &LabelRow, score: f64) -> Self {
        Self {
            t: row.t,
            frame_id: row.frame_id,
            box_l: row.box_l,
            box_r: Some(row.box_r),
            kp_l: Some(row.kp_l.to_vec()),
            kp_r: Some(row.kp_r.to_vec()),
            q: Some(row.q),
            label: row.label,
            score,
            bin_scores: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub score_thresh: f64,
    pub iou_thresholds: Vec<f64>,
    /// Threshold whose true positives feed the pose-error statistics.
    pub error_iou: f64,
    /// Scheme used to bin groundtruth orientations for `bin_map`.
    pub binning: Option<OrientationBinning>,
    pub execution: Execution,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            score_thresh: DEFAULT_SCORE_THRESH,
            iou_thresholds: REPORT_IOU_THRESHOLDS.to_vec(),
            error_iou: DEFAULT_IOU_THRESH,
            binning: None,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub score_thresh: f64,
    pub error_iou: f64,
    /// Precision keyed by IOU threshold, formatted as in `"0.05"`.
    pub map_at: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, OutcomeCounts>,
    pub uv: Option<ErrorStats>,
    pub xyz: Option<ErrorStats>,
    pub orientation: Option<OrientationStats>,
    pub bin_map: Option<f64>,
}

impl MetricsReport {
    pub fn precision_at(&self, t_iou: f64) -> Option<f64> {
        self.map_at.get(&threshold_key(t_iou)).copied()
    }

    /// Largest MAE/RMSE over every reported error space.
    pub fn max_error(&self) -> f64 {
        let mut m: f64 = 0.0;
        for s in [self.uv, self.xyz].into_iter().flatten() {
            m = m.max(s.mae).max(s.rmse);
        }
        if let Some(o) = self.orientation {
            for s in [o.yaw, o.pitch, o.roll] {
                m = m.max(s.mae).max(s.rmse);
            }
        }
        m
    }
}

pub fn threshold_key(t: f64) -> String {
    format!("{t}")
}

/// Per-frame outcome and errors for CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub frame_id: u64,
    pub outcome: DetectionOutcome,
    pub iou: f64,
    pub score: f64,
    pub uv_err: Option<f64>,
    pub xyz_err: Option<f64>,
    pub yaw_err: Option<f64>,
    pub pitch_err: Option<f64>,
    pub roll_err: Option<f64>,
}

struct Paired<'a> {
    label: &'a LabelRow,
    pred: Option<&'a PredictionRow>,
}

fn pair<'a>(labels: &'a [LabelRow], preds: &'a [PredictionRow]) -> Result<Vec<Paired<'a>>> {
    let mut by_frame: HashMap<u64, &PredictionRow> = HashMap::with_capacity(preds.len());
    let known: HashMap<u64, ()> = labels.iter().map(|l| (l.frame_id, ())).collect();
    for p in preds {
        if !known.contains_key(&p.frame_id) {
            return Err(Error::InvalidInput(format!("prediction for unknown frame {}", p.frame_id)));
        }
        if by_frame.insert(p.frame_id, p).is_some() {
            return Err(Error::InvalidInput(format!("duplicate prediction for frame {}", p.frame_id)));
        }
    }
    Ok(labels.iter().map(|l| Paired { label: l, pred: by_frame.get(&l.frame_id).copied() }).collect())
}

fn gt_box(l: &LabelRow) -> Option<BBox> {
    (l.label == ClassLabel::RightHand).then(|| BBox::from_array(l.box_l))
}

fn frame_eval(p: &Paired, cfg: &EvalConfig, rig: Option<&StereoRig>) -> Result<FrameEval> {
    let gt = gt_box(p.label);
    let pred_box = p.pred.map(|r| (BBox::from_array(r.box_l), r.score));
    let outcome = classify_detection(gt.as_ref(), pred_box.as_ref().map(|(b, s)| (b, *s)), cfg.score_thresh, cfg.error_iou);
    let iou = match (&gt, &pred_box) {
        (Some(g), Some((b, _))) => g.iou(b),
        _ => 0.0,
    };
    let mut e = FrameEval {
        frame_id: p.label.frame_id,
        outcome,
        iou,
        score: pred_box.map_or(0.0, |(_, s)| s),
        uv_err: None,
        xyz_err: None,
        yaw_err: None,
        pitch_err: None,
        roll_err: None,
    };
    let (Some(pred), DetectionOutcome::TruePositive) = (p.pred, outcome) else {
        return Ok(e);
    };
    let l = p.label;
    if let Some(kp) = pred.kp_l.as_deref().filter(|k| k.len() >= 2) {
        e.uv_err = Some(Vector2::new(kp[0] - l.kp_l[0], kp[1] - l.kp_l[1]).norm());
        if let (Some(rig), Some(z)) = (rig, kp.get(2)) {
            let gt_p = crate::labelgen::Keypoint::from_array(l.kp_l).point(&rig.left)?;
            let pr_p = crate::labelgen::Keypoint { u: kp[0], v: kp[1], z: *z }.point(&rig.left)?;
            e.xyz_err = Some((gt_p - pr_p).norm());
        }
    }
    if let Some(q) = pred.q {
        let d = euler_diff(&Quaternion::from_array(l.q), &Quaternion::from_array(q));
        (e.yaw_err, e.pitch_err, e.roll_err) = (Some(d[0]), Some(d[1]), Some(d[2]));
    }
    Ok(e)
}

/// Evaluates predictions against labels, matched by `frame_id`. Returns the
/// aggregate report and the per-frame breakdown at `cfg.error_iou`.
pub fn evaluate(
    labels: &[LabelRow],
    preds: &[PredictionRow],
    rig: Option<&StereoRig>,
    cfg: &EvalConfig,
) -> Result<(MetricsReport, Vec<FrameEval>)> {
    let paired = pair(labels, preds)?;
    let frames: Vec<FrameEval> =
        cfg.execution.map(&paired, |p| frame_eval(p, cfg, rig)).into_iter().collect::<Result<_>>()?;

    let mut map_at = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for &t_iou in &cfg.iou_thresholds {
        let outcomes: Vec<DetectionOutcome> = if t_iou == cfg.error_iou {
            frames.iter().map(|f| f.outcome).collect()
        } else {
            paired
                .iter()
                .map(|p| {
                    let gt = gt_box(p.label);
                    let pred = p.pred.map(|r| (BBox::from_array(r.box_l), r.score));
                    classify_detection(gt.as_ref(), pred.as_ref().map(|(b, s)| (b, *s)), cfg.score_thresh, t_iou)
                })
                .collect()
        };
        let c = OutcomeCounts::from_outcomes(&outcomes);
        map_at.insert(threshold_key(t_iou), c.precision());
        counts.insert(threshold_key(t_iou), c);
    }

    let collect = |f: fn(&FrameEval) -> Option<f64>| frames.iter().filter_map(f).collect::<Vec<f64>>();
    let stats = |v: Vec<f64>| if v.is_empty() { None } else { ErrorStats::from_errors(&v).ok() };
    let orientation = match (
        stats(collect(|f| f.yaw_err)),
        stats(collect(|f| f.pitch_err)),
        stats(collect(|f| f.roll_err)),
    ) {
        (Some(yaw), Some(pitch), Some(roll)) => Some(OrientationStats { yaw, pitch, roll }),
        _ => None,
    };

    let bin_map = match &cfg.binning {
        Some(scheme) => {
            let mut samples = Vec::new();
            for (p, f) in paired.iter().zip(&frames) {
                if let (DetectionOutcome::TruePositive, Some(scores)) =
                    (f.outcome, p.pred.and_then(|r| r.bin_scores.as_deref()))
                {
                    samples.push((bin_orientation(&Quaternion::from_array(p.label.q), scheme)?, scores));
                }
            }
            if samples.is_empty() {
                None
            } else {
                Some(bin_map(&samples)?)
            }
        }
        None => None,
    };

    let report = MetricsReport {
        score_thresh: cfg.score_thresh,
        error_iou: cfg.error_iou,
        map_at,
        counts,
        uv: stats(collect(|f| f.uv_err)),
        xyz: stats(collect(|f| f.xyz_err)),
        orientation,
        bin_map,
    };
    Ok((report, frames))
}

/// Precision at `t_iou` for each confidence threshold; diagnostic only.
pub fn threshold_sweep(
    labels: &[LabelRow],
    preds: &[PredictionRow],
    score_thresholds: &[f64],
    t_iou: f64,
) -> Result<Vec<(f64, f64)>> {
    let paired = pair(labels, preds)?;
    Ok(score_thresholds
        .iter()
        .map(|&t_c| {
            let outcomes: Vec<_> = paired
                .iter()
                .map(|p| {
                    let gt = gt_box(p.label);
                    let pred = p.pred.map(|r| (BBox::from_array(r.box_l), r.score));
                    classify_detection(gt.as_ref(), pred.as_ref().map(|(b, s)| (b, *s)), t_c, t_iou)
                })
                .collect();
            (t_c, precision(&outcomes))
        })
        .collect())
}
