//! JSON-lines readers/writers and the trajectory row format.

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::camera::PoseJson;
use crate::geometry::{Pose, Quaternion, TimedPose, TimedTrajectory};
use crate::{Error, Result};

/// Parses one value per non-empty line; errors carry the 1-based line number.
pub fn parse_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        out.push(row);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    parse_jsonl(BufReader::new(File::open(path)?))
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// One trajectory sample: `{"t": s, "q": [w,x,y,z], "p_m": [x,y,z]}`.
/// Mocap streams may add `"valid": false` for samples without tracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajRow {
    pub t: f64,
    pub q: [f64; 4],
    pub p_m: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<bool>,
}

impl TrajRow {
    pub fn new(t: f64, pose: &Pose) -> Self {
        Self { t, q: pose.rotation.to_array(), p_m: pose.translation.into(), valid: None }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(Quaternion::from_array(self.q), Vector3::from(self.p_m))
    }

    pub fn is_valid(&self) -> bool {
        self.valid.unwrap_or(true)
    }
}

/// Builds a trajectory from rows, returning the per-sample validity flags too.
pub fn trajectory_from_rows(rows: &[TrajRow]) -> Result<(TimedTrajectory, Vec<bool>)> {
    let rate = if rows.len() >= 2 {
        (rows.len() - 1) as f64 / (rows[rows.len() - 1].t - rows[0].t)
    } else {
        0.0
    };
    let samples = rows.iter().map(|r| TimedPose { t: r.t, pose: r.pose() }).collect();
    Ok((TimedTrajectory::new(samples, rate)?, rows.iter().map(TrajRow::is_valid).collect()))
}

pub fn rows_from_trajectory(traj: &TimedTrajectory, valid: Option<&[bool]>) -> Vec<TrajRow> {
    traj.samples()
        .iter()
        .enumerate()
        .map(|(i, s)| TrajRow { valid: valid.map(|v| v[i]), ..TrajRow::new(s.t, &s.pose) })
        .collect()
}

/// Simultaneous back-constellation and tip-marker observation used for
/// tip-offset calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipCalRow {
    pub t: f64,
    pub cb: PoseJson,
    pub ct: PoseJson,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_report_line_numbers() {
        let text = "{\"t\":0.0,\"q\":[1,0,0,0],\"p_m\":[0,0,0]}\n\n{\"t\":oops}\n";
        let err = parse_jsonl::<TrajRow>(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn traj_row_keys() {
        let row = TrajRow::new(0.5, &Pose::from_translation(1.0, 2.0, 3.0));
        let s = serde_json::to_string(&row).unwrap();
        assert_eq!(s, r#"{"t":0.5,"q":[1.0,0.0,0.0,0.0],"p_m":[1.0,2.0,3.0]}"#);
        let back: TrajRow = serde_json::from_str(&s).unwrap();
        assert!(back.is_valid());
    }
}
