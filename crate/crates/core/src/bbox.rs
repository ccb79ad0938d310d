//! Axis-aligned boxes in normalized image coordinates.

use serde::{Deserialize, Serialize};

/// Center/extent box; all coordinates are fractions of image width/height.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { cx: 0.5 * (x0 + x1), cy: 0.5 * (y0 + y1), w: x1 - x0, h: y1 - y0 }
    }

    /// `(x_min, y_min, x_max, y_max)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - 0.5 * self.w,
            self.cy - 0.5 * self.h,
            self.cx + 0.5 * self.w,
            self.cy + 0.5 * self.h,
        )
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.corners();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let (a0, b0, a1, b1) = self.corners();
        let (c0, d0, c1, d1) = other.corners();
        let w = (a1.min(c1) - a0.max(c0)).max(0.0);
        let h = (b1.min(d1) - b0.max(d0)).max(0.0);
        w * h
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_basics() {
        let a = BBox::new(0.5, 0.5, 0.2, 0.2);
        assert!((a.iou(&a) - 1.0).abs() < 1e-12);
        assert_eq!(a.iou(&BBox::new(0.9, 0.9, 0.1, 0.1)), 0.0);
        // half overlap along x: inter = 0.1*0.2, union = 2*0.04 - 0.02
        let b = BBox::new(0.6, 0.5, 0.2, 0.2);
        assert!((a.iou(&b) - 0.02 / 0.06).abs() < 1e-15);
        assert_eq!(BBox::new(0.5, 0.5, 0.0, 0.0).iou(&BBox::new(0.5, 0.5, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn corners_round_trip() {
        let b = BBox::from_corners(0.1, 0.2, 0.4, 0.8);
        let (x0, y0, x1, y1) = b.corners();
        assert!((x0 - 0.1).abs() < 1e-15 && (y0 - 0.2).abs() < 1e-15);
        assert!((x1 - 0.4).abs() < 1e-15 && (y1 - 0.8).abs() < 1e-15);
    }
}
