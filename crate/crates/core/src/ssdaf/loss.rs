use super::codec::{EncodedTarget, TargetRow};
use super::schema::FieldSchema;
use crate::{Error, Result};

const PROB_EPS: f64 = 1e-12;

/// Network output for one anchor at the head boundary. `class_prob` is the
/// sigmoid of the class logit; bin fields hold probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadRow {
    pub offsets: [f64; 4],
    pub fields: Vec<f64>,
    pub class_prob: f64,
}

impl From<&TargetRow> for HeadRow {
    /// A perfect prediction of `row`.
    fn from(row: &TargetRow) -> Self {
        Self { offsets: row.offsets, fields: row.fields.clone(), class_prob: row.class }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }
}

/// Loss components, already weighted and normalized: `total = loc + conf + fields`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub loc: f64,
    pub conf: f64,
    pub fields: f64,
    pub matched: usize,
}

pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Binary cross-entropy of probability `p` against target `y ∈ [0,1]`.
/// Zero-weight terms are skipped so saturated correct predictions cost exactly 0.
pub fn bce(p: f64, y: f64) -> f64 {
    let mut l = 0.0;
    if y > 0.0 {
        l -= y * p.max(PROB_EPS).ln();
    }
    if y < 1.0 {
        l -= (1.0 - y) * (1.0 - p).max(PROB_EPS).ln();
    }
    l
}

/// Cross-entropy of predicted probabilities against a target distribution.
pub fn categorical_ce(probs: &[f64], target: &[f64]) -> f64 {
    probs
        .iter()
        .zip(target)
        .filter(|(_, y)| **y > 0.0)
        .map(|(p, y)| -y * p.max(PROB_EPS).ln())
        .sum()
}

fn field_loss(schema: &FieldSchema, pred: &[f64], target: &[f64]) -> f64 {
    match schema.categorical_range() {
        Some(r) => {
            let reg: f64 = (0..pred.len())
                .filter(|i| !r.contains(i))
                .map(|i| smooth_l1(pred[i] - target[i]))
                .sum();
            reg + categorical_ce(&pred[r.clone()], &target[r])
        }
        None => pred.iter().zip(target).map(|(p, t)| smooth_l1(p - t)).sum(),
    }
}

/// Multibox loss with additional fields.
///
/// Localization and field terms are summed over matched anchors, the
/// confidence term over all anchors, and everything is divided by the matched
/// count `n`. With `n = 0` only the unscaled confidence term remains.
pub fn multibox_loss(
    schema: &FieldSchema,
    pred: &[HeadRow],
    target: &EncodedTarget,
    weights: LossWeights,
) -> Result<LossBreakdown> {
    if pred.len() != target.rows.len() {
        return Err(Error::ShapeMismatch(format!("{} predictions for {} anchors", pred.len(), target.rows.len())));
    }
    if target.k != schema.k() {
        return Err(Error::ShapeMismatch(format!("target has k={}, schema k={}", target.k, schema.k())));
    }
    let (mut loc, mut conf, mut fields, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (i, (p, t)) in pred.iter().zip(&target.rows).enumerate() {
        if p.fields.len() != target.k || t.fields.len() != target.k {
            return Err(Error::ShapeMismatch(format!("anchor {i}: field length differs from k={}", target.k)));
        }
        conf += bce(p.class_prob, t.class);
        if t.matched {
            n += 1;
            loc += p.offsets.iter().zip(&t.offsets).map(|(a, b)| smooth_l1(a - b)).sum::<f64>();
            fields += field_loss(schema, &p.fields, &t.fields);
        }
    }
    let conf = weights.alpha * conf;
    if n == 0 {
        return Ok(LossBreakdown { total: conf, loc: 0.0, conf, fields: 0.0, matched: 0 });
    }
    let scale = n as f64;
    let (loc, conf, fields) = (loc / scale, conf / scale, weights.beta * fields / scale);
    Ok(LossBreakdown { total: loc + conf + fields, loc, conf, fields, matched: n })
}
