use super::anchors::{decode_box, AnchorBox};
use super::loss::HeadRow;
use crate::bbox::BBox;

/// A scored box with its raw additional fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub fields: Vec<f64>,
    pub class_score: f64,
    /// Index of the anchor that produced this detection.
    pub anchor: usize,
}

/// Turns head outputs into detections, keeping those scoring at least `min_score`.
pub fn decode_detections(anchors: &[AnchorBox], rows: &[HeadRow], min_score: f64) -> Vec<Detection> {
    anchors
        .iter()
        .zip(rows)
        .enumerate()
        .filter(|(_, (_, r))| r.class_prob >= min_score)
        .map(|(i, (a, r))| Detection {
            bbox: decode_box(&r.offsets, a),
            fields: r.fields.clone(),
            class_score: r.class_prob.clamp(0.0, 1.0),
            anchor: i,
        })
        .collect()
}

/// Greedy NMS: highest score first, dropping boxes with IOU above
/// `iou_thresh` against any kept box, stopping after `top_k`.
/// Equal scores keep their input order.
pub fn nms_select(detections: &[Detection], iou_thresh: f64, top_k: usize) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].class_score.total_cmp(&detections[a].class_score));
    let mut kept: Vec<Detection> = Vec::new();
    for i in order {
        if kept.len() >= top_k {
            break;
        }
        let d = &detections[i];
        if kept.iter().all(|k| k.bbox.iou(&d.bbox) <= iou_thresh) {
            kept.push(d.clone());
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn det(cx: f64, cy: f64, w: f64, h: f64, s: f64) -> Detection {
        Detection { bbox: BBox::new(cx, cy, w, h), fields: vec![], class_score: s, anchor: 0 }
    }

    #[test]
    fn trivial_cases() {
        let d = det(0.5, 0.5, 0.2, 0.2, 0.3);
        assert_eq!(nms_select(std::slice::from_ref(&d), 0.5, 1), vec![d.clone()]);
        let kept = nms_select(&[det(0.5, 0.5, 0.2, 0.2, 0.8), det(0.5, 0.5, 0.2, 0.2, 0.9)], 0.5, 10);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].class_score, 0.9);
        assert!(nms_select(&[], 0.5, 1).is_empty());
    }

    // Reference: repeatedly take the best remaining box and delete everything it suppresses.
    fn brute_force(ds: &[Detection], thr: f64, top_k: usize) -> Vec<Detection> {
        let mut pool: Vec<(usize, Detection)> = ds.iter().cloned().enumerate().collect();
        let mut out = Vec::new();
        while !pool.is_empty() && out.len() < top_k {
            let mut best = 0;
            for j in 1..pool.len() {
                let (bj, bb) = (&pool[j], &pool[best]);
                if bj.1.class_score > bb.1.class_score || (bj.1.class_score == bb.1.class_score && bj.0 < bb.0) {
                    best = j;
                }
            }
            let (_, b) = pool.remove(best);
            pool.retain(|(_, d)| d.bbox.iou(&b.bbox) <= thr);
            out.push(b);
        }
        out
    }

    #[test]
    fn matches_brute_force_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let ds: Vec<_> = (0..100)
                .map(|_| {
                    det(
                        rng.random_range(0.2..0.8),
                        rng.random_range(0.2..0.8),
                        rng.random_range(0.05..0.4),
                        rng.random_range(0.05..0.4),
                        (rng.random_range(0..20) as f64) / 20.0,
                    )
                })
                .collect();
            for (thr, k) in [(0.5, 1), (0.3, 100), (0.7, 7)] {
                assert_eq!(nms_select(&ds, thr, k), brute_force(&ds, thr, k));
            }
        }
    }

    #[test]
    fn decode_filters_by_score() {
        let anchors = vec![
            AnchorBox { x: 0.3, y: 0.3, w: 0.2, h: 0.2, layer: 0, cell: 0 },
            AnchorBox { x: 0.7, y: 0.7, w: 0.2, h: 0.2, layer: 0, cell: 1 },
        ];
        let rows = vec![
            HeadRow { offsets: [0.0; 4], fields: vec![1.0], class_prob: 0.01 },
            HeadRow { offsets: [0.0; 4], fields: vec![2.0], class_prob: 0.9 },
        ];
        let ds = decode_detections(&anchors, &rows, 0.5);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].anchor, 1);
        assert_eq!(ds[0].bbox, anchors[1].bbox());
    }
}
