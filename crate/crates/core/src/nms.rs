//! Greedy pose deduplication on box IoU and keypoint OKS.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, oks, BBox, OksParams, Pose, Visibility};

/// A person hypothesis: detector box plus estimated pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredInstance {
    pub bbox: BBox,
    pub pose: Pose,
    pub box_score: f64,
    pub pose_score: f64,
    pub final_score: f64,
}

impl ScoredInstance {
    /// Takes the box score from `bbox.score` and the pose score from `pose.score`.
    pub fn new(bbox: BBox, pose: Pose) -> Result<Self> {
        let final_score = final_score(bbox.score, pose.score)?;
        Ok(ScoredInstance { box_score: bbox.score, pose_score: pose.score, final_score, bbox, pose })
    }

    pub fn rank_cmp(&self, other: &ScoredInstance) -> Ordering {
        other
            .final_score
            .total_cmp(&self.final_score)
            .then_with(|| self.bbox.coord_cmp(&other.bbox))
    }
}

pub fn final_score(box_score: f64, pose_score: f64) -> Result<f64> {
    for (name, v) in [("box_score", box_score), ("pose_score", pose_score)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
        }
    }
    Ok(box_score * pose_score)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    pub iou_thresh: f64,
    pub oks_thresh: f64,
    pub oks_params: OksParams,
}

impl Default for NmsConfig {
    fn default() -> Self {
        NmsConfig { iou_thresh: 0.6, oks_thresh: 0.75, oks_params: OksParams::default() }
    }
}

/// OKS of `other` against `reference`, using the reference box area as scale
/// and treating every reference keypoint as labeled. Degenerate reference
/// boxes give 0.
pub fn pose_overlap(reference: &ScoredInstance, other: &ScoredInstance, params: &OksParams) -> f64 {
    let mut gt = reference.pose.clone();
    for kp in &mut gt.keypoints {
        kp.visibility = Visibility::LabeledVisible;
    }
    oks(&other.pose, &gt, reference.bbox.area(), params).unwrap_or(0.0)
}

fn suppresses(kept: &ScoredInstance, other: &ScoredInstance, cfg: &NmsConfig) -> bool {
    iou(&kept.bbox, &other.bbox) > cfg.iou_thresh || pose_overlap(kept, other, &cfg.oks_params) > cfg.oks_thresh
}

/// Indices of the surviving instances, in selection order.
pub fn nms_indices(instances: &[ScoredInstance], cfg: &NmsConfig) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by(|&a, &b| instances[a].rank_cmp(&instances[b]));

    let mut alive = vec![true; order.len()];
    let mut kept = Vec::new();
    for i in 0..order.len() {
        if !alive[i] {
            continue;
        }
        let best = &instances[order[i]];
        kept.push(order[i]);
        for j in i + 1..order.len() {
            if alive[j] && suppresses(best, &instances[order[j]], cfg) {
                alive[j] = false;
            }
        }
    }
    kept
}

pub fn oks_iou_nms(instances: &[ScoredInstance], cfg: &NmsConfig) -> Vec<ScoredInstance> {
    nms_indices(instances, cfg).into_iter().map(|i| instances[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Keypoint;

    fn inst(x: f64, score: f64) -> ScoredInstance {
        let bbox = BBox::new(x, 0.0, x + 40.0, 80.0, 1.0);
        let pose = Pose::new(
            (0..17).map(|k| Keypoint::visible(x + 2.0 * k as f64, 4.0 * k as f64)).collect(),
            score,
        );
        ScoredInstance::new(bbox, pose).unwrap()
    }

    #[test]
    fn final_score_examples() {
        assert!((final_score(0.8, 0.5).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(final_score(1.0, 0.37).unwrap(), 0.37);
        assert_eq!(final_score(0.0, 0.37).unwrap(), 0.0);
        assert!(final_score(1.2, 0.5).is_err());
        assert!(final_score(0.5, -0.1).is_err());
    }

    #[test]
    fn identical_pair_collapses() {
        let a = inst(0.0, 0.9);
        let b = inst(0.0, 0.8);
        let kept = oks_iou_nms(&[b.clone(), a.clone()], &NmsConfig::default());
        assert_eq!(kept, vec![a]);
    }

    #[test]
    fn disjoint_pair_survives() {
        let a = inst(0.0, 0.9);
        let b = inst(500.0, 0.8);
        assert_eq!(nms_indices(&[b, a], &NmsConfig::default()), vec![1, 0]);
    }

    #[test]
    fn oks_alone_can_suppress() {
        // boxes barely overlap, poses coincide
        let a = inst(0.0, 0.9);
        let mut b = inst(0.0, 0.5);
        b.bbox = BBox::new(30.0, 0.0, 70.0, 80.0, 1.0);
        assert!(iou(&a.bbox, &b.bbox) < 0.6);
        assert_eq!(nms_indices(&[a, b], &NmsConfig::default()), vec![0]);
    }

    #[test]
    fn thresholds_at_one_keep_everything() {
        let items = vec![inst(0.0, 0.9), inst(0.0, 0.8), inst(1.0, 0.7)];
        let cfg = NmsConfig { iou_thresh: 1.0, oks_thresh: 1.0, ..NmsConfig::default() };
        assert_eq!(nms_indices(&items, &cfg).len(), 3);
        assert!(nms_indices(&[], &cfg).is_empty());
    }

    #[test]
    fn final_score_invariant() {
        let i = inst(0.0, 0.6);
        assert!((i.final_score - i.box_score * i.pose_score).abs() < 1e-9);
    }
}
