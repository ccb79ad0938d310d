//! Geometry, calibration, label generation, SSD-AF target coding and
//! evaluation for markerless egocentric 6-DoF controller tracking.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: quaternions, rigid poses, Euler angles and timed trajectories.
//! - [`camera`]: equidistant fisheye cameras and calibrated stereo rigs.
//! - [`calibration`]: hand-eye, tip-offset and clock-offset solvers.
//! - [`labelgen`]: transform chains to 2D boxes and keypoints, dataset cleaning.
//! - [`ssdaf`]: anchors, matching, additional-field coding, loss and NMS.
//! - [`metrics`]: detection outcome rule, precision and pose error statistics.
//! - [`pipeline`]: recording-level calibration and frame/mocap pairing.
//! - [`simulator`]: seeded synthetic scenes and an oracle predictor.
//!
//! Batch entry points take an [`Execution`] mode. With the `parallel`
//! feature (on by default) [`Execution::Parallel`] runs on the rayon pool;
//! without it every mode runs sequentially.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bbox;
pub mod calibration;
pub mod camera;
mod error;
pub mod exec;
pub mod geometry;
pub mod io;
pub mod labelgen;
pub mod metrics;
pub mod pipeline;
pub mod simulator;
pub mod ssdaf;

pub use bbox::BBox;
pub use camera::{FisheyeCamera, StereoRig};
pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{EulerAngles, Pose, Quaternion, TimedPose, TimedTrajectory};
