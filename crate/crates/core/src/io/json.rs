//! JSON documents exchanged by the command-line tools.
//!
//! All documents carry `schema_version`. Non-finite numbers are rejected on
//! both read and write. Unlabeled keypoints are written as `x = y = 0, v = 0`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ApResult, MotaResult};
use crate::geometry::{BBox, Keypoint, Pose, Visibility};
use crate::nms::ScoredInstance;
use crate::tracking::Embedding;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceJson {
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub box_score: f64,
    pub pose_score: f64,
    pub final_score: f64,
    /// Flat `[x, y, v] * K`.
    pub keypoints: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameJson {
    pub frame: u64,
    pub instances: Vec<InstanceJson>,
}

/// Per-image or per-frame pose instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseDocument {
    pub schema_version: u32,
    pub num_keypoints: usize,
    pub frames: Vec<FrameJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxJson {
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxFrameJson {
    pub frame: u64,
    pub boxes: Vec<BoxJson>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDocument {
    pub schema_version: u32,
    pub frames: Vec<BoxFrameJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap: Option<ApResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mota: Option<MotaResult>,
    /// Free-form provenance; not covered by determinism guarantees.
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl InstanceJson {
    pub fn from_instance(inst: &ScoredInstance, track_id: Option<u64>, embedding: Option<&Embedding>) -> Self {
        let b = &inst.bbox;
        let keypoints = inst
            .pose
            .keypoints
            .iter()
            .flat_map(|k| {
                if k.visibility.is_labeled() {
                    [k.x, k.y, k.visibility.code() as f64]
                } else {
                    [0.0, 0.0, 0.0]
                }
            })
            .collect();
        InstanceJson {
            bbox: [b.x_min, b.y_min, b.x_max, b.y_max],
            box_score: inst.box_score,
            pose_score: inst.pose_score,
            final_score: inst.final_score,
            keypoints,
            track_id,
            embedding: embedding.map(|e| e.0.clone()),
        }
    }

    /// Keypoint scores are not stored; labeled keypoints get the pose score.
    pub fn to_instance(&self) -> Result<ScoredInstance> {
        if !self.keypoints.len().is_multiple_of(3) {
            return Err(Error::Schema(format!("keypoints length {} not a multiple of 3", self.keypoints.len())));
        }
        let [x0, y0, x1, y1] = self.bbox;
        let bbox = BBox::new(x0, y0, x1, y1, self.box_score);
        let keypoints = self
            .keypoints
            .chunks_exact(3)
            .map(|c| {
                let v = visibility_code(c[2])?;
                Ok(Keypoint { x: c[0], y: c[1], visibility: v, score: if v.is_labeled() { self.pose_score } else { 0.0 } })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoredInstance {
            bbox,
            pose: Pose::new(keypoints, self.pose_score),
            box_score: self.box_score,
            pose_score: self.pose_score,
            final_score: self.final_score,
        })
    }

    fn check(&self, k: usize) -> Result<()> {
        if self.keypoints.len() != 3 * k {
            return Err(Error::Schema(format!("expected {} keypoint values, found {}", 3 * k, self.keypoints.len())));
        }
        let nums = self.bbox.iter().chain(&self.keypoints).chain([&self.box_score, &self.pose_score, &self.final_score]);
        if nums.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite number in instance".into()));
        }
        if self.embedding.as_ref().is_some_and(|e| e.iter().any(|v| !v.is_finite())) {
            return Err(Error::Schema("non-finite number in embedding".into()));
        }
        for c in self.keypoints.chunks_exact(3) {
            visibility_code(c[2])?;
        }
        Ok(())
    }
}

fn visibility_code(v: f64) -> Result<Visibility> {
    if v.fract() == 0.0 && (0.0..=2.0).contains(&v) {
        Ok(Visibility::from_code(v as u8).expect("range checked"))
    } else {
        Err(Error::Schema(format!("visibility flag {v} not in {{0, 1, 2}}")))
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Schema(format!("unsupported schema_version {v}")));
    }
    Ok(())
}

pub trait Document: Serialize + DeserializeOwned {
    fn validate(&self) -> Result<()>;
}

impl Document for PoseDocument {
    fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        for f in &self.frames {
            for inst in &f.instances {
                inst.check(self.num_keypoints)?;
            }
        }
        Ok(())
    }
}

impl Document for BoxDocument {
    fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        for b in self.frames.iter().flat_map(|f| &f.boxes) {
            if b.bbox.iter().chain([&b.score]).any(|v| !v.is_finite()) {
                return Err(Error::Schema("non-finite number in box".into()));
            }
        }
        Ok(())
    }
}

impl Document for MetricReport {
    fn validate(&self) -> Result<()> {
        check_version(self.schema_version)
    }
}

pub fn to_json_string<D: Document>(doc: &D) -> Result<String> {
    doc.validate()?;
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json_str<D: Document>(s: &str) -> Result<D> {
    let doc: D = serde_json::from_str(s)?;
    doc.validate()?;
    Ok(doc)
}

pub fn write_json<D: Document>(doc: &D, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json_string(doc)?)?;
    Ok(())
}

pub fn read_json<D: Document>(path: impl AsRef<Path>) -> Result<D> {
    from_json_str(&fs::read_to_string(path)?)
}

impl PoseDocument {
    pub fn new(num_keypoints: usize) -> Self {
        PoseDocument { schema_version: SCHEMA_VERSION, num_keypoints, frames: Vec::new() }
    }
}

impl BoxDocument {
    pub fn new() -> Self {
        BoxDocument { schema_version: SCHEMA_VERSION, frames: Vec::new() }
    }
}

impl Default for BoxDocument {
    fn default() -> Self {
        BoxDocument::new()
    }
}

impl BoxJson {
    pub fn from_box(b: &BBox) -> Self {
        BoxJson { bbox: [b.x_min, b.y_min, b.x_max, b.y_max], score: b.score }
    }

    pub fn to_box(&self) -> BBox {
        let [x0, y0, x1, y1] = self.bbox;
        BBox::new(x0, y0, x1, y1, self.score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PoseDocument {
        let inst = InstanceJson {
            bbox: [1.0, 2.0, 30.5, 40.25],
            box_score: 0.9,
            pose_score: 0.5,
            final_score: 0.45,
            keypoints: vec![1.5, 2.5, 2.0, 0.0, 0.0, 0.0],
            track_id: Some(3),
            embedding: Some(vec![0.1, -0.2]),
        };
        PoseDocument { schema_version: 1, num_keypoints: 2, frames: vec![FrameJson { frame: 0, instances: vec![inst] }] }
    }

    #[test]
    fn roundtrip() {
        let doc = sample();
        let s = to_json_string(&doc).unwrap();
        assert!(s.contains("\"box\""));
        assert_eq!(from_json_str::<PoseDocument>(&s).unwrap(), doc);
    }

    #[test]
    fn optional_fields_omitted() {
        let mut doc = sample();
        doc.frames[0].instances[0].track_id = None;
        doc.frames[0].instances[0].embedding = None;
        let s = to_json_string(&doc).unwrap();
        assert!(!s.contains("track_id") && !s.contains("embedding"));
    }

    #[test]
    fn rejects_bad_documents() {
        let mut doc = sample();
        doc.schema_version = 2;
        assert!(matches!(to_json_string(&doc), Err(Error::Schema(_))));

        let mut doc = sample();
        doc.frames[0].instances[0].keypoints.pop();
        assert!(matches!(to_json_string(&doc), Err(Error::Schema(_))));

        let mut doc = sample();
        doc.frames[0].instances[0].keypoints[2] = 3.0;
        assert!(matches!(to_json_string(&doc), Err(Error::Schema(_))));

        let mut doc = sample();
        doc.frames[0].instances[0].box_score = f64::NAN;
        assert!(matches!(to_json_string(&doc), Err(Error::Schema(_))));

        let s = to_json_string(&sample()).unwrap().replace("\"schema_version\": 1,", "");
        assert!(matches!(from_json_str::<PoseDocument>(&s), Err(Error::Json(_))));
    }

    #[test]
    fn instance_conversion() {
        let doc = sample();
        let inst = doc.frames[0].instances[0].to_instance().unwrap();
        assert_eq!(inst.pose.keypoints[0].visibility, Visibility::LabeledVisible);
        assert_eq!(inst.pose.keypoints[1].visibility, Visibility::NotLabeled);
        let back = InstanceJson::from_instance(&inst, Some(3), Some(&Embedding(vec![0.1, -0.2])));
        assert_eq!(back, doc.frames[0].instances[0]);
    }
}
