//! OKS average precision (COCO keypoint style) and keypoint-level MOTA
//! (PoseTrack style).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{oks, BBox, OksParams, Pose};
use crate::nms::ScoredInstance;

pub const NUM_OKS_THRESHOLDS: usize = 10;
const NUM_RECALL_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub pose: Pose,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub thresholds: Vec<f64>,
    /// Interpolated AP at each threshold in `thresholds`.
    pub per_threshold: Vec<f64>,
    /// No ground truth and no predictions; `ap` is reported as 1 by convention.
    pub vacuous: bool,
}

pub fn oks_thresholds() -> Vec<f64> {
    (0..NUM_OKS_THRESHOLDS).map(|i| 0.5 + 0.05 * i as f64).collect()
}

/// COCO-style keypoint AP over a set of images.
///
/// `predictions[i]` and `ground_truth[i]` belong to image `i`. Ground truths
/// without labeled keypoints are ignored.
pub fn evaluate_ap(
    predictions: &[Vec<ScoredInstance>],
    ground_truth: &[Vec<GroundTruth>],
    params: &OksParams,
) -> Result<ApResult> {
    if predictions.len() != ground_truth.len() {
        return Err(Error::invalid(format!(
            "{} prediction images vs {} ground-truth images",
            predictions.len(),
            ground_truth.len()
        )));
    }
    let thresholds = oks_thresholds();

    // OKS table per image: oks_table[img][pred][gt]
    let mut oks_table: Vec<Vec<Vec<Option<f64>>>> = Vec::with_capacity(predictions.len());
    let mut num_gt = 0usize;
    for (preds, gts) in predictions.iter().zip(ground_truth) {
        let mut img = Vec::with_capacity(preds.len());
        for p in preds {
            let mut row = Vec::with_capacity(gts.len());
            for g in gts {
                if g.pose.num_labeled() == 0 {
                    row.push(None);
                    continue;
                }
                row.push(Some(oks(&p.pose, &g.pose, g.bbox.area(), params)?));
            }
            img.push(row);
        }
        num_gt += gts.iter().filter(|g| g.pose.num_labeled() > 0).count();
        oks_table.push(img);
    }
    let num_pred: usize = predictions.iter().map(Vec::len).sum();

    if num_gt == 0 {
        let (ap, vacuous) = if num_pred == 0 { (1.0, true) } else { (0.0, false) };
        return Ok(ApResult {
            ap,
            ap50: ap,
            ap75: ap,
            per_threshold: vec![ap; thresholds.len()],
            thresholds,
            vacuous,
        });
    }

    let mut order: Vec<(usize, usize)> = predictions
        .iter()
        .enumerate()
        .flat_map(|(i, ps)| (0..ps.len()).map(move |j| (i, j)))
        .collect();
    order.sort_by(|&(ia, ja), &(ib, jb)| {
        predictions[ia][ja]
            .rank_cmp(&predictions[ib][jb])
            .then(ia.cmp(&ib))
            .then(ja.cmp(&jb))
    });

    let per_threshold: Vec<f64> = thresholds
        .iter()
        .map(|&t| {
            let mut taken: Vec<Vec<bool>> = ground_truth.iter().map(|g| vec![false; g.len()]).collect();
            let hits: Vec<bool> = order
                .iter()
                .map(|&(img, p)| {
                    let mut best: Option<(usize, f64)> = None;
                    for (g, v) in oks_table[img][p].iter().enumerate() {
                        let Some(v) = *v else { continue };
                        if taken[img][g] || v < t {
                            continue;
                        }
                        if best.is_none_or(|(_, bv)| v > bv) {
                            best = Some((g, v));
                        }
                    }
                    match best {
                        Some((g, _)) => {
                            taken[img][g] = true;
                            true
                        }
                        None => false,
                    }
                })
                .collect();
            interpolated_ap(&hits, num_gt)
        })
        .collect();

    let ap = per_threshold.iter().sum::<f64>() / per_threshold.len() as f64;
    Ok(ApResult { ap, ap50: per_threshold[0], ap75: per_threshold[5], thresholds, per_threshold, vacuous: false })
}

/// 101-point interpolated AP of a score-ordered hit sequence.
fn interpolated_ap(hits: &[bool], num_gt: usize) -> f64 {
    let mut recall = Vec::with_capacity(hits.len());
    let mut precision = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (i, &h) in hits.iter().enumerate() {
        tp += h as usize;
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let total: f64 = (0..NUM_RECALL_POINTS)
        .map(|r| {
            let thr = r as f64 / (NUM_RECALL_POINTS - 1) as f64;
            let idx = recall.partition_point(|&rc| rc < thr);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    total / NUM_RECALL_POINTS as f64
}

/// A pose carrying a track identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedPose {
    pub track_id: u64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MotaCounts {
    pub num_gt: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub ids: usize,
}

impl MotaCounts {
    pub fn mota(&self) -> Result<f64> {
        if self.num_gt == 0 {
            return Err(Error::UndefinedMetric("no labeled ground-truth keypoints".into()));
        }
        Ok(1.0 - (self.fn_ + self.fp + self.ids) as f64 / self.num_gt as f64)
    }

    fn add(&mut self, o: &MotaCounts) {
        self.num_gt += o.num_gt;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.ids += o.ids;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotaResult {
    pub mota: f64,
    pub totals: MotaCounts,
    /// Counts per keypoint type; `per_keypoint_mota[k]` is `None` for types
    /// without labeled ground truth.
    pub per_keypoint: Vec<MotaCounts>,
    pub per_keypoint_mota: Vec<Option<f64>>,
}

/// Keypoint-level MOTA.
///
/// Each keypoint type is tracked separately. In every frame a ground-truth
/// keypoint first keeps last frame's correspondence when that track is still
/// present and within `dist_thresh`; the rest are matched greedily by
/// distance. A matched ground truth whose track id differs from its previous
/// match counts as an identity switch.
pub fn evaluate_mota(pred: &[Vec<TrackedPose>], gt: &[Vec<TrackedPose>], dist_thresh: f64) -> Result<MotaResult> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!("{} prediction frames vs {} ground-truth frames", pred.len(), gt.len())));
    }
    if !(dist_thresh >= 0.0) {
        return Err(Error::invalid("dist_thresh must be >= 0"));
    }
    let k = gt
        .iter()
        .chain(pred)
        .flat_map(|f| f.iter().map(|p| p.pose.len()))
        .max()
        .unwrap_or(0);
    for p in gt.iter().chain(pred).flatten() {
        if p.pose.len() != k {
            return Err(Error::invalid("inconsistent keypoint count across poses"));
        }
    }

    let mut per_keypoint = vec![MotaCounts::default(); k];
    let thresh_sq = dist_thresh * dist_thresh;
    for (kp, counts) in per_keypoint.iter_mut().enumerate() {
        let mut last_match: HashMap<u64, u64> = HashMap::new();
        for (pf, gf) in pred.iter().zip(gt) {
            let gts: Vec<&TrackedPose> = gf.iter().filter(|g| g.pose.keypoints[kp].visibility.is_labeled()).collect();
            let preds: Vec<&TrackedPose> = pf.iter().filter(|p| p.pose.keypoints[kp].visibility.is_labeled()).collect();
            let dist = |g: &TrackedPose, p: &TrackedPose| g.pose.keypoints[kp].dist_sq(&p.pose.keypoints[kp]);

            let mut g_used = vec![false; gts.len()];
            let mut p_used = vec![false; preds.len()];
            let mut matched: Vec<(usize, usize)> = Vec::new();

            for (gi, g) in gts.iter().enumerate() {
                let Some(&prev) = last_match.get(&g.track_id) else { continue };
                let hit = preds
                    .iter()
                    .enumerate()
                    .find(|(pi, p)| !p_used[*pi] && p.track_id == prev && dist(g, p) <= thresh_sq);
                if let Some((pi, _)) = hit {
                    g_used[gi] = true;
                    p_used[pi] = true;
                    matched.push((gi, pi));
                }
            }

            let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
            for (gi, g) in gts.iter().enumerate().filter(|(i, _)| !g_used[*i]) {
                for (pi, p) in preds.iter().enumerate().filter(|(i, _)| !p_used[*i]) {
                    let d = dist(g, p);
                    if d <= thresh_sq {
                        pairs.push((d, gi, pi));
                    }
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            for (_, gi, pi) in pairs {
                if g_used[gi] || p_used[pi] {
                    continue;
                }
                g_used[gi] = true;
                p_used[pi] = true;
                matched.push((gi, pi));
            }

            counts.num_gt += gts.len();
            counts.fn_ += g_used.iter().filter(|u| !**u).count();
            counts.fp += p_used.iter().filter(|u| !**u).count();
            for (gi, pi) in matched {
                let (gid, pid) = (gts[gi].track_id, preds[pi].track_id);
                if let Some(prev) = last_match.insert(gid, pid) {
                    if prev != pid {
                        counts.ids += 1;
                    }
                }
            }
        }
    }

    let mut totals = MotaCounts::default();
    per_keypoint.iter().for_each(|c| totals.add(c));
    let mota = totals.mota()?;
    let per_keypoint_mota = per_keypoint.iter().map(|c| c.mota().ok()).collect();
    Ok(MotaResult { mota, totals, per_keypoint, per_keypoint_mota })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Keypoint;

    fn gt_at(x: f64, y: f64) -> GroundTruth {
        let pose = Pose::new((0..3).map(|i| Keypoint::visible(x + 10.0 * i as f64, y)).collect(), 1.0);
        GroundTruth { pose, bbox: BBox::new(x - 5.0, y - 20.0, x + 25.0, y + 20.0, 1.0) }
    }

    fn pred_from(g: &GroundTruth, score: f64) -> ScoredInstance {
        let mut p = ScoredInstance::new(g.bbox, g.pose.clone()).unwrap();
        p.final_score = score;
        p
    }

    fn params() -> OksParams {
        OksParams::uniform(3, 0.1)
    }

    #[test]
    fn perfect_predictions() {
        let gts = vec![vec![gt_at(0.0, 0.0), gt_at(100.0, 0.0)], vec![gt_at(50.0, 50.0)]];
        let preds: Vec<Vec<_>> = gts.iter().map(|f| f.iter().map(|g| pred_from(g, 1.0)).collect()).collect();
        let r = evaluate_ap(&preds, &gts, &params()).unwrap();
        assert_eq!(r.ap, 1.0);
        assert_eq!((r.ap50, r.ap75), (1.0, 1.0));
        assert!(!r.vacuous);
    }

    #[test]
    fn no_predictions() {
        let gts = vec![vec![gt_at(0.0, 0.0)]];
        let r = evaluate_ap(&[vec![]], &gts, &params()).unwrap();
        assert_eq!(r.ap, 0.0);
    }

    #[test]
    fn vacuous_when_empty() {
        let r = evaluate_ap(&[vec![]], &[vec![]], &params()).unwrap();
        assert!(r.vacuous);
        assert_eq!(r.ap, 1.0);
    }

    #[test]
    fn garbage_first_halves_ap50() {
        // PR sequence: FP (p=0, r=0), TP (p=0.5, r=1); the envelope gives 0.5
        // at every recall point.
        let g = gt_at(0.0, 0.0);
        let good = pred_from(&g, 0.9);
        let garbage = pred_from(&gt_at(400.0, 400.0), 0.95);
        let r = evaluate_ap(&[vec![good, garbage]], &[vec![g]], &params()).unwrap();
        assert_eq!(r.ap50, 0.5);
        assert_eq!(r.ap, 0.5);
    }

    #[test]
    fn mismatched_image_counts() {
        assert!(evaluate_ap(&[vec![]], &[], &params()).is_err());
    }

    fn tp(id: u64, xs: &[f64]) -> TrackedPose {
        TrackedPose { track_id: id, pose: Pose::new(xs.iter().map(|&x| Keypoint::visible(x, 0.0)).collect(), 1.0) }
    }

    #[test]
    fn mota_counts_formula() {
        let c = MotaCounts { num_gt: 10, fp: 1, fn_: 2, ids: 1 };
        assert!((c.mota().unwrap() - 0.6).abs() < 1e-15);
        assert!(MotaCounts::default().mota().is_err());
    }

    #[test]
    fn mota_perfect() {
        let frames: Vec<Vec<TrackedPose>> =
            (0..5).map(|t| vec![tp(0, &[t as f64, 10.0]), tp(1, &[100.0, 200.0 - t as f64])]).collect();
        let pred: Vec<Vec<TrackedPose>> = frames
            .iter()
            .map(|f| f.iter().map(|p| TrackedPose { track_id: p.track_id + 7, ..p.clone() }).collect())
            .collect();
        let r = evaluate_mota(&pred, &frames, 5.0).unwrap();
        assert_eq!(r.mota, 1.0);
        assert_eq!((r.totals.fp, r.totals.fn_, r.totals.ids), (0, 0, 0));
        assert_eq!(r.totals.num_gt, 20);
    }

    #[test]
    fn mota_fp_fn_ids() {
        // frame 0: both matched; frame 1: ids swap; frame 2: a miss and a spurious
        let gt = vec![
            vec![tp(0, &[0.0]), tp(1, &[100.0])],
            vec![tp(0, &[0.0]), tp(1, &[100.0])],
            vec![tp(0, &[0.0]), tp(1, &[100.0])],
        ];
        let pred = vec![
            vec![tp(5, &[0.0]), tp(6, &[100.0])],
            vec![tp(6, &[0.0]), tp(5, &[100.0])],
            vec![tp(6, &[1.0]), tp(9, &[300.0])],
        ];
        let r = evaluate_mota(&pred, &gt, 5.0).unwrap();
        assert_eq!(r.totals, MotaCounts { num_gt: 6, fp: 1, fn_: 1, ids: 2 });
        assert!((r.mota - (1.0 - 4.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn mota_undefined_without_gt() {
        let r = evaluate_mota(&[vec![tp(0, &[0.0])]], &[vec![]], 1.0);
        assert!(matches!(r, Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn unlabeled_gt_keypoints_are_skipped() {
        let mut g = tp(0, &[0.0, 5.0]);
        g.pose.keypoints[1] = Keypoint::unlabeled();
        let p = tp(0, &[0.0, 5.0]);
        let r = evaluate_mota(&[vec![p]], &[vec![g]], 1.0).unwrap();
        assert_eq!(r.per_keypoint[1], MotaCounts { num_gt: 0, fp: 1, fn_: 0, ids: 0 });
        assert_eq!(r.per_keypoint_mota[1], None);
    }
}
