use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::codec::{EncodedTarget, TargetRow};
use super::schema::FieldSchema;
use crate::{Error, Result};

/// JSON sidecar describing a flat target file: one row per anchor,
/// `rows_per_sample` rows per image, little-endian `f32` values laid out as
/// `columns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetLayout {
    pub dtype: String,
    pub endianness: String,
    pub samples: usize,
    pub rows_per_sample: usize,
    pub row_len: usize,
    pub columns: Vec<String>,
    pub schema: FieldSchema,
}

impl TargetLayout {
    pub fn new(schema: FieldSchema, samples: usize, rows_per_sample: usize) -> Self {
        let mut columns: Vec<String> = ["t_cx", "t_cy", "t_w", "t_h"].map(String::from).to_vec();
        columns.extend(schema.field_names());
        columns.push("class".into());
        columns.push("matched".into());
        Self {
            dtype: "float32".into(),
            endianness: "little".into(),
            samples,
            rows_per_sample,
            row_len: columns.len(),
            columns,
            schema,
        }
    }
}

/// Sidecar path: the binary path with its extension replaced by `.json`.
pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Writes targets to `bin` and the layout to its sidecar.
pub fn write_targets(bin: &Path, schema: &FieldSchema, targets: &[EncodedTarget]) -> Result<TargetLayout> {
    let rows_per_sample = targets.first().map_or(0, |t| t.rows.len());
    for t in targets {
        if t.rows.len() != rows_per_sample || t.k != schema.k() {
            return Err(Error::ShapeMismatch("targets disagree on anchor count or k".into()));
        }
    }
    let layout = TargetLayout::new(schema.clone(), targets.len(), rows_per_sample);
    let mut w = BufWriter::new(File::create(bin)?);
    for row in targets.iter().flat_map(|t| &t.rows) {
        let values = row
            .offsets
            .iter()
            .chain(&row.fields)
            .copied()
            .chain([row.class, if row.matched { 1.0 } else { 0.0 }]);
        for v in values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    crate::io::write_json(sidecar_path(bin), &layout)?;
    Ok(layout)
}

/// Reads a file written by [`write_targets`]. Values come back at `f32` precision.
pub fn read_targets(bin: &Path) -> Result<(TargetLayout, Vec<EncodedTarget>)> {
    let layout: TargetLayout = crate::io::read_json(sidecar_path(bin))?;
    let k = layout.schema.k();
    if layout.row_len != k + 6 {
        return Err(Error::ShapeMismatch(format!("row_len {} does not fit k={k}", layout.row_len)));
    }
    let mut bytes = Vec::new();
    File::open(bin)?.read_to_end(&mut bytes)?;
    let expected = layout.samples * layout.rows_per_sample * layout.row_len * 4;
    if bytes.len() != expected {
        return Err(Error::ShapeMismatch(format!("{} bytes, layout implies {expected}", bytes.len())));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let mut rows = values.chunks_exact(layout.row_len).map(|r| TargetRow {
        offsets: [r[0], r[1], r[2], r[3]],
        fields: r[4..4 + k].to_vec(),
        class: r[4 + k],
        matched: r[5 + k] != 0.0,
    });
    let targets = (0..layout.samples)
        .map(|_| EncodedTarget { rows: rows.by_ref().take(layout.rows_per_sample).collect(), k })
        .collect();
    Ok((layout, targets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssdaf::Variant;

    #[test]
    fn round_trip_through_disk() {
        let dir = std::env::temp_dir().join(format!("egotrack-export-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let bin = dir.join("targets.bin");
        let schema = FieldSchema::new(Variant::AF3D).unwrap();
        let t = EncodedTarget {
            rows: vec![
                TargetRow { offsets: [0.5, -0.25, 1.0, 2.0], fields: vec![0.125, 3.0, -1.5], class: 1.0, matched: true },
                TargetRow { offsets: [0.0; 4], fields: vec![0.0; 3], class: 0.0, matched: false },
            ],
            k: 3,
        };
        let layout = write_targets(&bin, &schema, &[t.clone(), t.clone()]).unwrap();
        assert_eq!(layout.row_len, 9);
        assert_eq!(layout.columns[4..7], ["t_u", "t_v", "t_z"].map(String::from));
        assert_eq!(std::fs::metadata(&bin).unwrap().len(), 2 * 2 * 9 * 4);
        let (back_layout, back) = read_targets(&bin).unwrap();
        assert_eq!(back_layout, layout);
        assert_eq!(back, vec![t.clone(), t]);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
