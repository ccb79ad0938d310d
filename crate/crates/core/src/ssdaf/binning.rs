use std::f64::consts::{PI, TAU};

use super::schema::EulerAxis;
use crate::geometry::{wrap_angle, EulerAngles, Quaternion};
use crate::{Error, Result};

/// Orientation discretization. Each Euler axis range `[−π, π)` is split into
/// equal cells: `∛bins` per axis for the full scheme, `bins` along one axis
/// for the axis scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationBinning {
    Full { bins: usize },
    Axis { axis: EulerAxis, bins: usize },
}

/// Representative orientation of a bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinCenter {
    Full(EulerAngles),
    Axis { axis: EulerAxis, angle: f64 },
}

fn cube_root(b: usize) -> Option<usize> {
    let s = (b as f64).cbrt().round() as usize;
    (s > 0 && s * s * s == b).then_some(s)
}

impl OrientationBinning {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OrientationBinning::Full { bins } => cube_root(bins)
                .map(|_| ())
                .ok_or_else(|| Error::InvalidConfig(format!("full binning needs a perfect cube, got {bins}"))),
            OrientationBinning::Axis { bins: 0, .. } => {
                Err(Error::InvalidConfig("axis binning needs at least one bin".into()))
            }
            OrientationBinning::Axis { .. } => Ok(()),
        }
    }

    pub fn bins(&self) -> usize {
        match *self {
            OrientationBinning::Full { bins } | OrientationBinning::Axis { bins, .. } => bins,
        }
    }

    /// Cells per binned axis.
    pub fn cells_per_axis(&self) -> Result<usize> {
        self.validate()?;
        Ok(match *self {
            OrientationBinning::Full { bins } => cube_root(bins).unwrap_or(1),
            OrientationBinning::Axis { bins, .. } => bins,
        })
    }
}

fn cell(angle: f64, cells: usize) -> usize {
    // map (−π, π] onto [−π, π) so that +π shares the first cell
    let a = wrap_angle(angle);
    let a = if a >= PI { a - TAU } else { a };
    (((a + PI) / TAU * cells as f64).floor() as usize).min(cells - 1)
}

fn center(index: usize, cells: usize) -> f64 {
    -PI + (index as f64 + 0.5) * TAU / cells as f64
}

/// Width of one cell in radians.
pub fn bin_width(scheme: &OrientationBinning) -> Result<f64> {
    Ok(TAU / scheme.cells_per_axis()? as f64)
}

/// Bin index of an orientation. Full scheme: `i_yaw·s² + i_pitch·s + i_roll`.
pub fn bin_orientation(q: &Quaternion, scheme: &OrientationBinning) -> Result<usize> {
    let s = scheme.cells_per_axis()?;
    let ypr = q.to_euler().ypr();
    Ok(match scheme {
        OrientationBinning::Full { .. } => cell(ypr[0], s) * s * s + cell(ypr[1], s) * s + cell(ypr[2], s),
        OrientationBinning::Axis { axis, .. } => cell(ypr[axis.index()], s),
    })
}

/// Cell-center orientation of bin `index`.
pub fn bin_center(scheme: &OrientationBinning, index: usize) -> Result<BinCenter> {
    let s = scheme.cells_per_axis()?;
    if index >= scheme.bins() {
        return Err(Error::InvalidInput(format!("bin {index} out of range for {} bins", scheme.bins())));
    }
    Ok(match scheme {
        OrientationBinning::Full { .. } => BinCenter::Full(EulerAngles::from_ypr([
            center(index / (s * s), s),
            center((index / s) % s, s),
            center(index % s, s),
        ])),
        OrientationBinning::Axis { axis, .. } => BinCenter::Axis { axis: *axis, angle: center(index, s) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_falls_in_central_bin() {
        let full27 = OrientationBinning::Full { bins: 27 };
        assert_eq!(bin_orientation(&Quaternion::identity(), &full27).unwrap(), 13);
        let full512 = OrientationBinning::Full { bins: 512 };
        assert_eq!(bin_orientation(&Quaternion::identity(), &full512).unwrap(), 4 * 64 + 4 * 8 + 4);
    }

    #[test]
    fn range_minimum_is_bin_zero() {
        let yaw20 = OrientationBinning::Axis { axis: EulerAxis::Yaw, bins: 20 };
        let q = Quaternion::from_euler(&EulerAngles::new(0.0, 0.0, -PI));
        assert_eq!(bin_orientation(&q, &yaw20).unwrap(), 0);
    }

    #[test]
    fn non_cube_full_scheme_rejected() {
        assert!(bin_orientation(&Quaternion::identity(), &OrientationBinning::Full { bins: 26 }).is_err());
    }

    #[test]
    fn center_of_bin_13_of_27_is_zero() {
        let c = bin_center(&OrientationBinning::Full { bins: 27 }, 13).unwrap();
        match c {
            BinCenter::Full(e) => assert!(e.ypr().iter().all(|a| a.abs() < 1e-15)),
            _ => panic!(),
        }
        assert!(bin_center(&OrientationBinning::Full { bins: 27 }, 27).is_err());
    }

    proptest! {
        #[test]
        fn quantization_within_half_bin(
            roll in -PI..PI, pitch in -1.5f64..1.5, yaw in -PI..PI,
            which in 0usize..5,
        ) {
            let scheme = [
                OrientationBinning::Full { bins: 27 },
                OrientationBinning::Full { bins: 512 },
                OrientationBinning::Axis { axis: EulerAxis::Yaw, bins: 20 },
                OrientationBinning::Axis { axis: EulerAxis::Pitch, bins: 20 },
                OrientationBinning::Axis { axis: EulerAxis::Roll, bins: 20 },
            ][which];
            let q = Quaternion::from_euler(&EulerAngles::new(roll, pitch, yaw));
            let e = q.to_euler().ypr();
            let idx = bin_orientation(&q, &scheme).unwrap();
            prop_assert!(idx < scheme.bins());
            let half = 0.5 * bin_width(&scheme).unwrap() + 1e-12;
            match bin_center(&scheme, idx).unwrap() {
                BinCenter::Full(c) => {
                    for (a, b) in c.ypr().iter().zip(e) {
                        prop_assert!(wrap_angle(a - b).abs() <= half);
                    }
                }
                BinCenter::Axis { axis, angle } => {
                    prop_assert!(wrap_angle(angle - e[axis.index()]).abs() <= half);
                }
            }
        }
    }
}
