use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::path::Path;

use super::anchors::AnchorConfig;
use super::binning::OrientationBinning;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EulerAxis {
    Yaw,
    Pitch,
    Roll,
}

impl EulerAxis {
    /// Position in `[yaw, pitch, roll]`.
    pub fn index(self) -> usize {
        match self {
            EulerAxis::Yaw => 0,
            EulerAxis::Pitch => 1,
            EulerAxis::Roll => 2,
        }
    }
}

/// Which additional fields a model variant predicts.
#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    /// `(t_u, t_v)` of the tip in the left image.
    AF2D,
    /// `(t_u, t_v, t_z)` in the left image.
    AF3D,
    /// `(t_u, t_v, t_z)` in the left then the right image.
    AFStereo3D,
    /// Per image `(t_u, t_v, t_z, qx, qy, qz, qw)`.
    AFQuat6D,
    /// Per image `(t_u, t_v, t_z, pitch, yaw, roll)`.
    AFEuler6D,
    /// One-hot over `bins` full-orientation cells.
    AFBinned { bins: usize },
    /// `(t_u, t_v, t_z)` then a one-hot over `bins` full-orientation cells.
    AF3DBinned { bins: usize },
    /// `(t_u, t_v, t_z)` then a one-hot over `bins` cells of a single axis.
    AxisBinned { axis: EulerAxis, bins: usize },
    /// `(t_u, t_v, t_z)` for each canonical keypoint, left image first.
    MultiPoint { keypoints: Vec<Vector3<f64>> },
}

/// Four non-coplanar corners of the hand cube, in tip space (meters).
pub fn default_multipoint_keypoints() -> Vec<Vector3<f64>> {
    vec![
        Vector3::new(-0.03, -0.05, -0.01),
        Vector3::new(0.05, -0.05, -0.01),
        Vector3::new(-0.03, 0.01, -0.01),
        Vector3::new(-0.03, -0.05, 0.10),
    ]
}

/// A validated variant with its derived field count.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSchema {
    variant: Variant,
}

impl FieldSchema {
    pub fn new(variant: Variant) -> Result<Self> {
        match &variant {
            Variant::AFBinned { bins } | Variant::AF3DBinned { bins } => {
                OrientationBinning::Full { bins: *bins }.validate()?;
            }
            Variant::AxisBinned { axis, bins } => {
                OrientationBinning::Axis { axis: *axis, bins: *bins }.validate()?;
            }
            Variant::MultiPoint { keypoints } => {
                if keypoints.len() < 3 {
                    return Err(Error::InvalidConfig("MultiPoint needs at least 3 keypoints".into()));
                }
                super::keypoints::check_not_collinear(keypoints)?;
            }
            _ => {}
        }
        Ok(Self { variant })
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            Variant::AF2D => "AF2D",
            Variant::AF3D => "AF3D",
            Variant::AFStereo3D => "AFStereo3D",
            Variant::AFQuat6D => "AFQuat6D",
            Variant::AFEuler6D => "AFEuler6D",
            Variant::AFBinned { .. } => "AFBinned",
            Variant::AF3DBinned { .. } => "AF3DBinned",
            Variant::AxisBinned { .. } => "AxisBinned",
            Variant::MultiPoint { .. } => "MultiPoint",
        }
    }

    /// Number of additional fields `k`.
    pub fn k(&self) -> usize {
        match &self.variant {
            Variant::AF2D => 2,
            Variant::AF3D => 3,
            Variant::AFStereo3D => 6,
            Variant::AFQuat6D => 14,
            Variant::AFEuler6D => 12,
            Variant::AFBinned { bins } => *bins,
            Variant::AF3DBinned { bins } | Variant::AxisBinned { bins, .. } => 3 + bins,
            Variant::MultiPoint { keypoints } => 6 * keypoints.len(),
        }
    }

    pub fn binning(&self) -> Option<OrientationBinning> {
        match &self.variant {
            Variant::AFBinned { bins } | Variant::AF3DBinned { bins } => Some(OrientationBinning::Full { bins: *bins }),
            Variant::AxisBinned { axis, bins } => Some(OrientationBinning::Axis { axis: *axis, bins: *bins }),
            _ => None,
        }
    }

    /// Fields trained with categorical cross-entropy; the rest use Smooth L1.
    pub fn categorical_range(&self) -> Option<Range<usize>> {
        match &self.variant {
            Variant::AFBinned { bins } => Some(0..*bins),
            Variant::AF3DBinned { bins } | Variant::AxisBinned { bins, .. } => Some(3..3 + bins),
            _ => None,
        }
    }

    pub fn is_regression(&self) -> bool {
        self.categorical_range().is_none()
    }

    /// Column names for the field block.
    pub fn field_names(&self) -> Vec<String> {
        let tri = |p: &str| vec![format!("t_u{p}"), format!("t_v{p}"), format!("t_z{p}")];
        let one_hot = |n: usize| (0..n).map(|i| format!("bin{i}")).collect::<Vec<_>>();
        match &self.variant {
            Variant::AF2D => vec!["t_u".into(), "t_v".into()],
            Variant::AF3D => tri(""),
            Variant::AFStereo3D => [tri("1"), tri("2")].concat(),
            Variant::AFQuat6D => ["1", "2"]
                .iter()
                .flat_map(|p| [tri(p), ["qx", "qy", "qz", "qw"].iter().map(|q| format!("{q}{p}")).collect()].concat())
                .collect(),
            Variant::AFEuler6D => ["1", "2"]
                .iter()
                .flat_map(|p| {
                    [tri(p), ["pitch", "yaw", "roll"].iter().map(|q| format!("{q}{p}")).collect()].concat()
                })
                .collect(),
            Variant::AFBinned { bins } => one_hot(*bins),
            Variant::AF3DBinned { bins: n } | Variant::AxisBinned { bins: n, .. } => [tri(""), one_hot(*n)].concat(),
            Variant::MultiPoint { keypoints } => ["1", "2"]
                .iter()
                .flat_map(|img| (0..keypoints.len()).flat_map(move |k| tri(&format!("_k{k}_{img}"))))
                .collect(),
        }
    }
}

/// Serialized schema: `{"variant": .., "bins": .., "axis": .., "keypoints": [[x,y,z], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaJson {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<EulerAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<Vec<[f64; 3]>>,
}

impl TryFrom<SchemaJson> for FieldSchema {
    type Error = Error;

    fn try_from(s: SchemaJson) -> Result<Self> {
        let bins = || s.bins.ok_or_else(|| Error::InvalidConfig(format!("{} requires `bins`", s.variant)));
        let variant = match s.variant.as_str() {
            "AF2D" => Variant::AF2D,
            "AF3D" => Variant::AF3D,
            "AFStereo3D" => Variant::AFStereo3D,
            "AFQuat6D" => Variant::AFQuat6D,
            "AFEuler6D" => Variant::AFEuler6D,
            "AFBinned" => Variant::AFBinned { bins: bins()? },
            "AF3DBinned" => Variant::AF3DBinned { bins: bins()? },
            "AxisBinned" => Variant::AxisBinned {
                axis: s.axis.ok_or_else(|| Error::InvalidConfig("AxisBinned requires `axis`".into()))?,
                bins: bins()?,
            },
            "MultiPoint" => Variant::MultiPoint {
                keypoints: match &s.keypoints {
                    Some(k) => k.iter().map(|p| Vector3::from(*p)).collect(),
                    None => default_multipoint_keypoints(),
                },
            },
            other => return Err(Error::InvalidConfig(format!("unknown schema variant `{other}`"))),
        };
        FieldSchema::new(variant)
    }
}

impl From<&FieldSchema> for SchemaJson {
    fn from(s: &FieldSchema) -> Self {
        let mut out = SchemaJson { variant: s.name().to_string(), bins: None, axis: None, keypoints: None };
        match &s.variant {
            Variant::AFBinned { bins } | Variant::AF3DBinned { bins } => out.bins = Some(*bins),
            Variant::AxisBinned { axis, bins } => {
                out.bins = Some(*bins);
                out.axis = Some(*axis);
            }
            Variant::MultiPoint { keypoints } => out.keypoints = Some(keypoints.iter().map(|p| [p.x, p.y, p.z]).collect()),
            _ => {}
        }
        out
    }
}

impl Serialize for FieldSchema {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SchemaJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FieldSchema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        SchemaJson::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}

/// Schema plus anchor layout, as stored in a model config file. The anchor
/// `layers` array may be omitted to use [`AnchorConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub schema: FieldSchema,
    #[serde(default = "default_layers")]
    pub layers: Vec<super::anchors::LayerSpec>,
}

fn default_layers() -> Vec<super::anchors::LayerSpec> {
    AnchorConfig::default().layers
}

impl ModelConfig {
    pub fn new(schema: FieldSchema) -> Self {
        Self { schema, layers: default_layers() }
    }

    pub fn anchors(&self) -> AnchorConfig {
        AnchorConfig { layers: self.layers.clone() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        crate::io::read_json(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(v: Variant) -> FieldSchema {
        FieldSchema::new(v).unwrap()
    }

    #[test]
    fn field_counts() {
        assert_eq!(schema(Variant::AF2D).k(), 2);
        assert_eq!(schema(Variant::AF3D).k(), 3);
        assert_eq!(schema(Variant::AFStereo3D).k(), 6);
        assert_eq!(schema(Variant::AFQuat6D).k(), 14);
        assert_eq!(schema(Variant::AFEuler6D).k(), 12);
        assert_eq!(schema(Variant::AFBinned { bins: 27 }).k(), 27);
        assert_eq!(schema(Variant::AF3DBinned { bins: 512 }).k(), 515);
        assert_eq!(schema(Variant::AxisBinned { axis: EulerAxis::Yaw, bins: 20 }).k(), 23);
        assert_eq!(schema(Variant::MultiPoint { keypoints: default_multipoint_keypoints() }).k(), 24);
        for v in [
            Variant::AF2D,
            Variant::AFQuat6D,
            Variant::AF3DBinned { bins: 27 },
            Variant::MultiPoint { keypoints: default_multipoint_keypoints() },
        ] {
            let s = schema(v);
            assert_eq!(s.field_names().len(), s.k());
        }
    }

    #[test]
    fn invalid_schemas_rejected() {
        assert!(FieldSchema::new(Variant::AFBinned { bins: 20 }).is_err());
        assert!(FieldSchema::new(Variant::AxisBinned { axis: EulerAxis::Roll, bins: 0 }).is_err());
        let collinear = vec![Vector3::zeros(), Vector3::x(), Vector3::x() * 2.0];
        assert!(FieldSchema::new(Variant::MultiPoint { keypoints: collinear }).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"variant":"AxisBinned","bins":20,"axis":"pitch"}"#;
        let s: FieldSchema = serde_json::from_str(text).unwrap();
        assert_eq!(s.variant(), &Variant::AxisBinned { axis: EulerAxis::Pitch, bins: 20 });
        assert_eq!(serde_json::to_string(&s).unwrap(), text);

        let mp: FieldSchema = serde_json::from_str(r#"{"variant":"MultiPoint"}"#).unwrap();
        assert_eq!(mp.k(), 24);

        let cfg: ModelConfig = serde_json::from_str(
            r#"{"variant":"AF3D","layers":[{"grid":[2,2],"scale":0.5,"aspects":[1.0]}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.anchors().layers.len(), 1);
        let dflt: ModelConfig = serde_json::from_str(r#"{"variant":"AF3D"}"#).unwrap();
        assert_eq!(dflt.anchors(), AnchorConfig::default());
        assert!(serde_json::from_str::<FieldSchema>(r#"{"variant":"Nope"}"#).is_err());
    }
}
