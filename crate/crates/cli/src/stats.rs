//! Dataset histograms: pixel occupancy of the left boxes, box size, tip
//! position and tip orientation (degrees).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use egotrack::labelgen::{ClassLabel, Keypoint, LabelRow};
use egotrack::{Quaternion, StereoRig};

use crate::require_files;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    /// CSV plus SVG renderings.
    Svg,
    Json,
}

#[derive(Args)]
pub struct StatsArgs {
    #[arg(long)]
    labels: PathBuf,
    /// Rig JSON; box sizes are reported in pixels and x/y are added.
    #[arg(long)]
    rig: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Bins per 1D histogram.
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Occupancy grid columns.
    #[arg(long, default_value_t = 32)]
    grid_cols: usize,
    /// Occupancy grid rows.
    #[arg(long, default_value_t = 24)]
    grid_rows: usize,
}

/// Equal-width histogram over `[lo, hi]`; a degenerate range gets one bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub name: String,
    pub unit: String,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(name: &str, unit: &str, values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n = if hi > lo { bins.max(1) } else { 1 };
        let width = (hi - lo) / n as f64;
        let edges = (0..=n).map(|i| if i == n { hi } else { lo + i as f64 * width }).collect();
        let mut counts = vec![0; n];
        for v in values {
            let i = if n == 1 { 0 } else { (((v - lo) / width).floor() as usize).min(n - 1) };
            counts[i] += 1;
        }
        Self { name: name.into(), unit: unit.into(), edges, counts }
    }

    fn csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        let col = |end: &str| format!("{}_{}_{end}", self.name, self.unit);
        w.write_record([col("lo"), col("hi"), "count".into()])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([format!("{:.6}", self.edges[i]), format!("{:.6}", self.edges[i + 1]), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    fn svg(&self) -> String {
        let (w, h, pad) = (480.0, 240.0, 30.0);
        let max = self.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
        let bar = (w - 2.0 * pad) / self.counts.len() as f64;
        let mut s = svg_header(w, h);
        for (i, c) in self.counts.iter().enumerate() {
            let bh = (h - 2.0 * pad) * *c as f64 / max;
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="#4a78b0"/>"##,
                pad + i as f64 * bar,
                h - pad - bh,
                (bar - 1.0).max(0.5)
            );
        }
        let lo = self.edges[0];
        let hi = self.edges[self.edges.len() - 1];
        let _ = writeln!(s, r#"<text x="{pad}" y="{}" font-size="11">{lo:.2}</text>"#, h - 10.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{hi:.2}</text>"#, w - pad, h - 10.0);
        let _ = writeln!(s, r#"<text x="{}" y="18" font-size="13" text-anchor="middle">{} ({})</text>"#, w / 2.0, self.name, self.unit);
        s + "</svg>\n"
    }
}

fn svg_header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

/// Per-cell count of left boxes covering the cell, row-major from the top.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Occupancy {
    pub cols: usize,
    pub rows: usize,
    pub counts: Vec<Vec<u64>>,
}

impl Occupancy {
    fn new(boxes: &[[f64; 4]], cols: usize, rows: usize) -> Self {
        let mut counts = vec![vec![0; cols]; rows];
        let span = |lo: f64, hi: f64, n: usize| {
            let a = ((lo.clamp(0.0, 1.0) * n as f64).floor() as usize).min(n - 1);
            let b = ((hi.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(a + 1, n);
            a..b
        };
        for b in boxes {
            for r in span(b[1] - b[3] / 2.0, b[1] + b[3] / 2.0, rows) {
                for c in span(b[0] - b[2] / 2.0, b[0] + b[2] / 2.0, cols) {
                    counts[r][c] += 1;
                }
            }
        }
        Self { cols, rows, counts }
    }

    fn csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(std::iter::once("row".to_string()).chain((0..self.cols).map(|c| format!("c{c}"))))?;
        for (r, row) in self.counts.iter().enumerate() {
            w.write_record(std::iter::once(r.to_string()).chain(row.iter().map(u64::to_string)))?;
        }
        w.flush()?;
        Ok(())
    }

    fn svg(&self) -> String {
        let cell = 15.0;
        let (w, h) = (self.cols as f64 * cell, self.rows as f64 * cell);
        let max = self.counts.iter().flatten().copied().max().unwrap_or(1).max(1) as f64;
        let mut s = svg_header(w, h);
        for (r, row) in self.counts.iter().enumerate() {
            for (c, n) in row.iter().enumerate() {
                let v = 255 - (255.0 * *n as f64 / max).round() as u8;
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb(255,{v},{v})"/>"#,
                    c as f64 * cell,
                    r as f64 * cell
                );
            }
        }
        s + "</svg>\n"
    }
}

#[derive(Debug, Serialize)]
struct Bundle {
    samples: usize,
    occupancy: Occupancy,
    histograms: Vec<Histogram>,
}

fn bundle(rows: &[LabelRow], rig: Option<&StereoRig>, a: &StatsArgs) -> Result<Bundle> {
    let hands: Vec<&LabelRow> = rows.iter().filter(|r| r.label == ClassLabel::RightHand).collect();
    ensure!(!hands.is_empty(), "label file has no hand samples");
    let boxes: Vec<[f64; 4]> = hands.iter().map(|r| r.box_l).collect();
    let col = |f: &dyn Fn(&LabelRow) -> f64| hands.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let mut hist = Vec::new();
    let (sw, sh, unit) = match rig {
        Some(r) => (r.left.width as f64, r.left.height as f64, "px"),
        None => (1.0, 1.0, "norm"),
    };
    hist.push(Histogram::new("box_w", unit, &col(&|r| r.box_l[2] * sw), a.bins));
    hist.push(Histogram::new("box_h", unit, &col(&|r| r.box_l[3] * sh), a.bins));
    if let Some(rig) = rig {
        let points = hands
            .iter()
            .map(|r| Keypoint::from_array(r.kp_l).point(&rig.left).with_context(|| format!("frame {}", r.frame_id)))
            .collect::<Result<Vec<_>>>()?;
        hist.push(Histogram::new("x", "m", &points.iter().map(|p| p.x).collect::<Vec<_>>(), a.bins));
        hist.push(Histogram::new("y", "m", &points.iter().map(|p| p.y).collect::<Vec<_>>(), a.bins));
    }
    hist.push(Histogram::new("z", "m", &col(&|r| r.kp_l[2]), a.bins));
    let euler: Vec<_> = hands.iter().map(|r| Quaternion::from_array(r.q).to_euler()).collect();
    hist.push(Histogram::new("roll", "deg", &euler.iter().map(|e| e.roll.to_degrees()).collect::<Vec<_>>(), a.bins));
    hist.push(Histogram::new("pitch", "deg", &euler.iter().map(|e| e.pitch.to_degrees()).collect::<Vec<_>>(), a.bins));
    hist.push(Histogram::new("yaw", "deg", &euler.iter().map(|e| e.yaw.to_degrees()).collect::<Vec<_>>(), a.bins));
    Ok(Bundle { samples: hands.len(), occupancy: Occupancy::new(&boxes, a.grid_cols, a.grid_rows), histograms: hist })
}

pub fn run(a: StatsArgs) -> Result<()> {
    require_files(std::iter::once(a.labels.as_path()).chain(a.rig.as_deref()))?;
    ensure!(a.bins > 0 && a.grid_cols > 0 && a.grid_rows > 0, "bin and grid counts must be positive");
    let rows: Vec<LabelRow> =
        egotrack::io::read_jsonl(&a.labels).with_context(|| format!("reading {}", a.labels.display()))?;
    ensure!(!rows.is_empty(), "{} is empty", a.labels.display());
    let rig = a.rig.as_deref().map(StereoRig::load).transpose().context("reading rig")?;
    let b = bundle(&rows, rig.as_ref(), &a)?;

    let out = &a.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match a.format {
        Format::Json => egotrack::io::write_json(out.join("stats.json"), &b)?,
        Format::Csv | Format::Svg => {
            b.occupancy.csv(&out.join("occupancy.csv"))?;
            for h in &b.histograms {
                h.csv(&out.join(format!("hist_{}.csv", h.name)))?;
            }
            if a.format == Format::Svg {
                std::fs::write(out.join("occupancy.svg"), b.occupancy.svg())?;
                for h in &b.histograms {
                    std::fs::write(out.join(format!("hist_{}.svg", h.name)), h.svg())?;
                }
            }
        }
    }
    println!("{} samples, {} histograms -> {}", b.samples, b.histograms.len() + 1, out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_edges_and_counts() {
        let h = Histogram::new("v", "m", &[0.0, 0.1, 0.5, 0.99, 1.0], 4);
        assert_eq!(h.edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(h.counts, vec![2, 0, 1, 2]);
        let one = Histogram::new("v", "m", &[3.0, 3.0], 10);
        assert_eq!((one.edges, one.counts), (vec![3.0, 3.0], vec![2]));
    }

    #[test]
    fn occupancy_covers_box_cells() {
        let o = Occupancy::new(&[[0.5, 0.5, 0.5, 0.5]], 4, 4);
        assert_eq!(o.counts, vec![vec![0, 0, 0, 0], vec![0, 1, 1, 0], vec![0, 1, 1, 0], vec![0, 0, 0, 0]]);
        let edge = Occupancy::new(&[[1.0, 1.0, 0.0, 0.0]], 2, 2);
        assert_eq!(edge.counts[1][1], 1);
    }
}
