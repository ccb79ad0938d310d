//! SSD with additional fields: the tensors at the detection-head boundary.
//!
//! Each anchor carries 4 box offsets, `k` additional fields and one class
//! probability. This module generates anchors, assigns groundtruth to them,
//! encodes/decodes the additional fields for every supported schema,
//! evaluates the training loss and selects final detections.

mod anchors;
mod binning;
mod codec;
mod export;
mod keypoints;
mod loss;
mod nms;
mod schema;

pub use anchors::{
    decode_box, encode_box, generate_anchors, match_anchors, AnchorBox, AnchorConfig, LayerSpec, MATCH_IOU,
};
pub use binning::{bin_center, bin_orientation, bin_width, BinCenter, OrientationBinning};
pub use codec::{build_target, DecodedBin, DecodedFields, DecodedKeypoint, EncodedTarget, FieldCodec, TargetRow};
pub use export::{read_targets, write_targets, TargetLayout};
pub use keypoints::{orientation_from_keypoints, rigid_align};
pub use loss::{bce, categorical_ce, multibox_loss, smooth_l1, HeadRow, LossBreakdown, LossWeights};
pub use nms::{decode_detections, nms_select, Detection};
pub use schema::{default_multipoint_keypoints, EulerAxis, FieldSchema, ModelConfig, Variant};
