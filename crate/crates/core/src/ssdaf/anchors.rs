use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::exec::Execution;
use crate::{Error, Result};

/// Anchors with IOU strictly above this are matched to the groundtruth.
pub const MATCH_IOU: f64 = 0.5;

/// Default box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub layer: usize,
    /// Row-major cell index within the layer grid.
    pub cell: usize,
}

impl AnchorBox {
    pub fn bbox(&self) -> BBox {
        BBox::new(self.x, self.y, self.w, self.h)
    }
}

/// One feature map: a `cols × rows` grid with one anchor per aspect ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    /// `[cols, rows]`.
    pub grid: [usize; 2],
    pub scale: f64,
    pub aspects: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub layers: Vec<LayerSpec>,
}

impl Default for AnchorConfig {
    /// Grids 20×15, 10×8 and 5×4 for a 4:3 image, scales 0.2/0.45/0.7,
    /// aspect ratios {1, 2, 1/2}.
    fn default() -> Self {
        let aspects = vec![1.0, 2.0, 0.5];
        Self {
            layers: vec![
                LayerSpec { grid: [20, 15], scale: 0.2, aspects: aspects.clone() },
                LayerSpec { grid: [10, 8], scale: 0.45, aspects: aspects.clone() },
                LayerSpec { grid: [5, 4], scale: 0.7, aspects },
            ],
        }
    }
}

/// Anchors in layer → row → column → aspect order. Width and height are
/// `scale·√a` and `scale/√a`, capped at 1.
pub fn generate_anchors(config: &AnchorConfig) -> Result<Vec<AnchorBox>> {
    if config.layers.is_empty() {
        return Err(Error::InvalidConfig("anchor config has no layers".into()));
    }
    let mut out = Vec::new();
    for (li, layer) in config.layers.iter().enumerate() {
        let [cols, rows] = layer.grid;
        if cols == 0 || rows == 0 || layer.aspects.is_empty() {
            return Err(Error::InvalidConfig(format!("layer {li} has an empty grid or no aspect ratios")));
        }
        if !(layer.scale > 0.0) || layer.aspects.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidConfig(format!("layer {li} has a non-positive scale or aspect")));
        }
        for r in 0..rows {
            for c in 0..cols {
                for a in &layer.aspects {
                    let s = a.sqrt();
                    out.push(AnchorBox {
                        x: (c as f64 + 0.5) / cols as f64,
                        y: (r as f64 + 0.5) / rows as f64,
                        w: (layer.scale * s).min(1.0),
                        h: (layer.scale / s).min(1.0),
                        layer: li,
                        cell: r * cols + c,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Groundtruth index assigned to each anchor, or `None` for background.
///
/// An anchor takes the groundtruth it overlaps most if that IOU exceeds
/// [`MATCH_IOU`]. Every groundtruth additionally claims its single best
/// anchor (lowest index on ties) so that no box goes unmatched.
pub fn match_anchors(gt: &[BBox], anchors: &[AnchorBox], exec: Execution) -> Vec<Option<usize>> {
    if gt.is_empty() {
        return vec![None; anchors.len()];
    }
    let ious: Vec<Vec<f64>> = exec.map(anchors, |a| {
        let ab = a.bbox();
        gt.iter().map(|g| ab.iou(g)).collect()
    });
    let mut assignment: Vec<Option<usize>> = ious
        .iter()
        .map(|row| {
            let (j, best) = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if *v > acc.1 { (j, *v) } else { acc });
            (best > MATCH_IOU).then_some(j)
        })
        .collect();
    for j in 0..gt.len() {
        let (best_anchor, _) = ious
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, row)| if row[j] > acc.1 { (i, row[j]) } else { acc });
        assignment[best_anchor] = Some(j);
    }
    assignment
}

/// Standard SSD box offsets `((cx−x)/w, (cy−y)/h, ln(w_b/w), ln(h_b/h))`.
pub fn encode_box(b: &BBox, a: &AnchorBox) -> [f64; 4] {
    [(b.cx - a.x) / a.w, (b.cy - a.y) / a.h, (b.w / a.w).ln(), (b.h / a.h).ln()]
}

pub fn decode_box(o: &[f64; 4], a: &AnchorBox) -> BBox {
    BBox::new(o[0] * a.w + a.x, o[1] * a.h + a.y, o[2].exp() * a.w, o[3].exp() * a.h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_anchor_covers_image() {
        let cfg = AnchorConfig { layers: vec![LayerSpec { grid: [1, 1], scale: 1.0, aspects: vec![1.0] }] };
        let a = generate_anchors(&cfg).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].bbox(), BBox::new(0.5, 0.5, 1.0, 1.0));
    }

    #[test]
    fn default_config_counts_and_bounds() {
        let a = generate_anchors(&AnchorConfig::default()).unwrap();
        assert_eq!(a.len(), 300 * 3 + 80 * 3 + 20 * 3);
        assert_eq!(a.len(), 1200);
        for b in &a {
            assert!(b.x > 0.0 && b.x < 1.0 && b.y > 0.0 && b.y < 1.0);
            assert!(b.w > 0.0 && b.w <= 1.0 && b.h > 0.0 && b.h <= 1.0);
        }
        assert_eq!(a, generate_anchors(&AnchorConfig::default()).unwrap());
    }

    #[test]
    fn empty_config_rejected() {
        assert!(generate_anchors(&AnchorConfig { layers: vec![] }).is_err());
    }

    #[test]
    fn identical_box_is_matched() {
        let anchors = generate_anchors(&AnchorConfig::default()).unwrap();
        let gt = anchors[417].bbox();
        let m = match_anchors(&[gt], &anchors, Execution::Sequential);
        assert_eq!(m[417], Some(0));
    }

    #[test]
    fn tiny_box_still_gets_its_argmax_anchor() {
        let anchors = generate_anchors(&AnchorConfig::default()).unwrap();
        let gt = BBox::new(0.31, 0.62, 0.02, 0.03);
        let m = match_anchors(&[gt], &anchors, Execution::Sequential);
        let matched: Vec<usize> = m.iter().enumerate().filter_map(|(i, x)| x.map(|_| i)).collect();
        assert_eq!(matched.len(), 1);
        // brute force argmax with lowest-index tie breaking
        let mut best = 0;
        for i in 0..anchors.len() {
            if anchors[i].bbox().iou(&gt) > anchors[best].bbox().iou(&gt) {
                best = i;
            }
        }
        assert_eq!(matched[0], best);
    }

    #[test]
    fn no_groundtruth_means_all_background() {
        let anchors = generate_anchors(&AnchorConfig::default()).unwrap();
        assert!(match_anchors(&[], &anchors, Execution::Parallel).iter().all(Option::is_none));
    }

    #[test]
    fn box_offsets_round_trip() {
        let anchors = generate_anchors(&AnchorConfig::default()).unwrap();
        let b = BBox::new(0.43, 0.57, 0.12, 0.2);
        for a in anchors.iter().step_by(37) {
            let back = decode_box(&encode_box(&b, a), a);
            for (x, y) in back.to_array().iter().zip(b.to_array()) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }
}
