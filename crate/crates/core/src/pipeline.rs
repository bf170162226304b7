//! End-to-end run over a synthetic sequence:
//! candidates -> GBG -> ratio-extended ROIs -> rendered maps -> decode ->
//! OKS/IoU NMS -> tracking -> AP and MOTA.
//!
//! The pose network is simulated: for every kept box the ground-truth pose of
//! the best-overlapping person is viewed through that box (so misaligned
//! boxes yield misplaced keypoints), rendered into ROI-local target maps with
//! additive noise, and decoded.

use serde::{Deserialize, Serialize};

use crate::decoding::{decode, decode_heatmap_only};
use crate::encoding::EncodingConfig;
use crate::error::Result;
use crate::eval::{evaluate_ap, evaluate_mota, ApResult, GroundTruth, MotaResult, TrackedPose};
use crate::gbg::{gbg_select, GbgConfig};
use crate::geometry::{extend_to_ratio, iou, BBox};
use crate::nms::{NmsConfig, ScoredInstance};
use crate::synth::{
    generate_candidates, generate_sequence, observe_embedding, pose_through_box, render_maps, stream_rng,
    ScenarioConfig, Sequence, StreamDomain,
};
use crate::tracking::{Detection, TrackConfig, Tracker};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub scenario: ScenarioConfig,
    pub n_frames: usize,
    pub stride: u32,
    /// Disk radius in pixels.
    pub radius: f64,
    /// Heatmap smoothing in grid cells.
    pub sigma: f64,
    pub use_offsets: bool,
    /// ROI width / height.
    pub roi_ratio: f64,
    pub gbg: GbgConfig,
    pub nms: NmsConfig,
    pub track: TrackConfig,
    /// MOTA keypoint match distance in pixels.
    pub mota_thresh: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scenario: ScenarioConfig::default(),
            n_frames: 10,
            stride: 4,
            radius: 4.0,
            sigma: 0.0,
            use_offsets: true,
            roi_ratio: 3.0 / 4.0,
            gbg: GbgConfig::default(),
            nms: NmsConfig::default(),
            track: TrackConfig::default(),
            mota_thresh: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub instances: Vec<ScoredInstance>,
    pub track_ids: Vec<u64>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub sequence: Sequence,
    pub frames: Vec<FrameOutput>,
    pub ap: ApResult,
    pub mota: MotaResult,
    pub ids_issued: u64,
}

/// Simulated pose estimation for one ROI.
fn estimate(
    cfg: &PipelineConfig,
    gt: &crate::geometry::Pose,
    gt_box: &BBox,
    kept: &BBox,
    frame: usize,
    slot: usize,
) -> Result<ScoredInstance> {
    let roi = extend_to_ratio(kept, cfg.roi_ratio)?;
    let seen = pose_through_box(gt, gt_box, kept);
    let local = seen.translated(-roi.x_min, -roi.y_min);
    let enc = EncodingConfig::covering(roi.width(), roi.height(), cfg.stride, cfg.radius, gt.len())?;
    let mut rng = stream_rng(cfg.scenario.seed, StreamDomain::Maps, frame as u32, slot as u32);
    let (heat, off) = render_maps(&local, &enc, cfg.scenario.map_noise, &mut rng)?;
    let decoded = if cfg.use_offsets {
        decode(&heat, &off, &enc, cfg.sigma)?
    } else {
        decode_heatmap_only(&heat, &enc, cfg.sigma)?
    };
    let pose = decoded.pose.translated(roi.x_min, roi.y_min);
    ScoredInstance::new(*kept, pose)
}

pub fn run_on_sequence(cfg: &PipelineConfig, sequence: Sequence) -> Result<PipelineOutput> {
    let mut tracker = Tracker::new(cfg.track.clone());
    let mut frames = Vec::with_capacity(sequence.frames.len());

    for (f, scene) in sequence.frames.iter().enumerate() {
        let candidates = generate_candidates(&scene.boxes, &cfg.scenario, f as u32);
        let kept = gbg_select(&candidates, &cfg.gbg).kept;

        let mut instances = Vec::with_capacity(kept.len());
        let mut owners = Vec::with_capacity(kept.len());
        for (slot, b) in kept.iter().enumerate() {
            if b.width() <= 0.0 || b.height() <= 0.0 {
                continue;
            }
            // ties go to the lowest person index
            let Some(owner) = (0..scene.len()).max_by(|&a, &c| {
                iou(b, &scene.boxes[a]).total_cmp(&iou(b, &scene.boxes[c])).then(c.cmp(&a))
            }) else {
                continue;
            };
            instances.push(estimate(cfg, &scene.poses[owner], &scene.boxes[owner], b, f, slot)?);
            owners.push(owner);
        }

        let keep = crate::nms::nms_indices(&instances, &cfg.nms);
        let detections: Vec<Detection> = keep
            .iter()
            .map(|&i| Detection {
                instance: instances[i].clone(),
                embedding: observe_embedding(&cfg.scenario, &sequence, f, owners[i]),
            })
            .collect();
        let track_ids = tracker.step(&detections)?;
        let instances = detections.iter().map(|d| d.instance.clone()).collect();
        frames.push(FrameOutput { instances, track_ids, detections });
    }

    let (ap, mota) = score(cfg, &sequence, &frames)?;
    Ok(PipelineOutput { sequence, frames, ap, mota, ids_issued: tracker.ids_issued() })
}

fn score(cfg: &PipelineConfig, sequence: &Sequence, frames: &[FrameOutput]) -> Result<(ApResult, MotaResult)> {
    let preds: Vec<Vec<ScoredInstance>> = frames.iter().map(|f| f.instances.clone()).collect();
    let gts: Vec<Vec<GroundTruth>> = sequence
        .frames
        .iter()
        .map(|s| s.poses.iter().zip(&s.boxes).map(|(p, b)| GroundTruth { pose: p.clone(), bbox: *b }).collect())
        .collect();
    let ap = evaluate_ap(&preds, &gts, &cfg.nms.oks_params)?;

    let pred_tracks: Vec<Vec<TrackedPose>> = frames
        .iter()
        .map(|f| {
            f.instances
                .iter()
                .zip(&f.track_ids)
                .map(|(i, &id)| TrackedPose { track_id: id, pose: i.pose.clone() })
                .collect()
        })
        .collect();
    let gt_tracks: Vec<Vec<TrackedPose>> = sequence
        .frames
        .iter()
        .map(|s| s.poses.iter().zip(&s.ids).map(|(p, &id)| TrackedPose { track_id: id, pose: p.clone() }).collect())
        .collect();
    let mota = evaluate_mota(&pred_tracks, &gt_tracks, cfg.mota_thresh)?;
    Ok((ap, mota))
}

/// Generates a sequence from `cfg.scenario` and runs the full chain on it.
pub fn run(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let sequence = generate_sequence(&cfg.scenario, cfg.n_frames)?;
    run_on_sequence(cfg, sequence)
}
