//! Greedy frame-to-frame identity assignment.
//!
//! Similarity between a track and a detection blends box IoU with an
//! appearance term derived from the Euclidean distance of their embeddings:
//!
//! `lambda * IoU + (1 - lambda) * exp(-|e_t - e_d|² / tau)`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, Pose};
use crate::nms::ScoredInstance;

/// Appearance feature produced by an external re-identification model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(pub Vec<f32>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dist_sq(&self, other: &Embedding) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::invalid(format!("embedding dims {} vs {}", self.dim(), other.dim())));
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let d = *a as f64 - *b as f64;
                d * d
            })
            .sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub instance: ScoredInstance,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackState {
    Active,
    Lost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    pub last_box: BBox,
    pub last_pose: Pose,
    pub embedding: Embedding,
    /// Frames since the last match.
    pub age: u32,
    pub state: TrackState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackConfig {
    pub lambda_spatial: f64,
    pub tau: f64,
    pub match_thresh: f64,
    pub max_age: u32,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig { lambda_spatial: 0.5, tau: 1.0, match_thresh: 0.5, max_age: 10 }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_spatial) {
            return Err(Error::invalid("lambda_spatial outside [0, 1]"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.match_thresh) {
            return Err(Error::invalid("match_thresh outside [0, 1]"));
        }
        Ok(())
    }
}

pub fn similarity(track: &Track, det: &Detection, cfg: &TrackConfig) -> Result<f64> {
    let spatial = iou(&track.last_box, &det.instance.bbox);
    let appearance = (-track.embedding.dist_sq(&det.embedding)? / cfg.tau).exp();
    Ok(cfg.lambda_spatial * spatial + (1.0 - cfg.lambda_spatial) * appearance)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// `(track index, detection index, similarity)` in selection order.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Greedy one-to-one matching by descending similarity. Lost tracks take no
/// part and appear in neither output list.
pub fn associate(tracks: &[Track], detections: &[Detection], cfg: &TrackConfig) -> Result<Association> {
    let mut pairs = Vec::new();
    for (ti, t) in tracks.iter().enumerate() {
        if t.state != TrackState::Active {
            continue;
        }
        for (di, d) in detections.iter().enumerate() {
            let s = similarity(t, d, cfg)?;
            if s >= cfg.match_thresh {
                pairs.push((ti, di, s));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut track_used = vec![false; tracks.len()];
    let mut det_used = vec![false; detections.len()];
    let mut out = Association::default();
    for (ti, di, s) in pairs {
        if track_used[ti] || det_used[di] {
            continue;
        }
        track_used[ti] = true;
        det_used[di] = true;
        out.matches.push((ti, di, s));
    }
    out.unmatched_tracks = tracks
        .iter()
        .enumerate()
        .filter(|(i, t)| t.state == TrackState::Active && !track_used[*i])
        .map(|(i, _)| i)
        .collect();
    out.unmatched_detections = (0..detections.len()).filter(|&i| !det_used[i]).collect();
    Ok(out)
}

/// Owns the track set of one sequence.
#[derive(Debug, Clone, Default)]
pub struct Tracker {
    pub cfg: TrackConfig,
    pub tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: TrackConfig) -> Self {
        Tracker { cfg, tracks: Vec::new(), next_id: 0 }
    }

    /// Number of ids handed out so far.
    pub fn ids_issued(&self) -> u64 {
        self.next_id
    }

    pub fn active(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.state == TrackState::Active)
    }

    /// Advances one frame and returns the track id assigned to each detection.
    pub fn step(&mut self, detections: &[Detection]) -> Result<Vec<u64>> {
        let assoc = associate(&self.tracks, detections, &self.cfg)?;
        let mut ids = vec![0u64; detections.len()];
        for &(ti, di, _) in &assoc.matches {
            let t = &mut self.tracks[ti];
            let d = &detections[di];
            t.last_box = d.instance.bbox;
            t.last_pose = d.instance.pose.clone();
            t.embedding = d.embedding.clone();
            t.age = 0;
            ids[di] = t.id;
        }
        for &ti in &assoc.unmatched_tracks {
            let t = &mut self.tracks[ti];
            t.age += 1;
            if t.age > self.cfg.max_age {
                t.state = TrackState::Lost;
            }
        }
        for &di in &assoc.unmatched_detections {
            let d = &detections[di];
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track {
                id,
                last_box: d.instance.bbox,
                last_pose: d.instance.pose.clone(),
                embedding: d.embedding.clone(),
                age: 0,
                state: TrackState::Active,
            });
            ids[di] = id;
        }
        Ok(ids)
    }
}
