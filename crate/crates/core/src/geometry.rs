//! Boxes, keypoints, poses and the similarity measures shared by the rest of
//! the crate. All coordinates are continuous image pixels; nothing here rounds
//! to integer pixels.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// COCO keypoint count.
pub const COCO_KEYPOINTS: usize = 17;

/// Per-keypoint standard deviations from the COCO keypoint evaluation.
const COCO_SIGMAS: [f64; COCO_KEYPOINTS] = [
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072, 0.062, 0.062, 0.107, 0.107,
    0.087, 0.087, 0.089, 0.089,
];

/// Axis-aligned box in corner coordinates with a confidence score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub score: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, score: f64) -> Self {
        BBox { x_min, y_min, x_max, y_max, score }
    }

    /// Checked constructor enforcing ordered corners and a score in `[0, 1]`.
    pub fn try_new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, score: f64) -> Result<Self> {
        let b = BBox::new(x_min, y_min, x_max, y_max, score);
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max, self.score];
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("box has non-finite values"));
        }
        if self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(Error::invalid(format!("box corners out of order: {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::invalid(format!("box score {} outside [0, 1]", self.score)));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }

    /// Canonical ordering: score descending, then corner coordinates ascending.
    pub fn rank_cmp(&self, other: &BBox) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.coord_cmp(other))
    }

    /// Lexicographic order on `(x_min, y_min, x_max, y_max)`.
    pub fn coord_cmp(&self, other: &BBox) -> Ordering {
        self.x_min
            .total_cmp(&other.x_min)
            .then_with(|| self.y_min.total_cmp(&other.y_min))
            .then_with(|| self.x_max.total_cmp(&other.x_max))
            .then_with(|| self.y_max.total_cmp(&other.y_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum Visibility {
    #[default]
    NotLabeled = 0,
    LabeledInvisible = 1,
    LabeledVisible = 2,
}

impl Visibility {
    pub fn is_labeled(self) -> bool {
        self != Visibility::NotLabeled
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(v: u8) -> Option<Self> {
        match v {
            0 => Some(Visibility::NotLabeled),
            1 => Some(Visibility::LabeledInvisible),
            2 => Some(Visibility::LabeledVisible),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visibility: Visibility,
    pub score: f64,
}

impl Keypoint {
    pub fn visible(x: f64, y: f64) -> Self {
        Keypoint { x, y, visibility: Visibility::LabeledVisible, score: 1.0 }
    }

    pub fn unlabeled() -> Self {
        Keypoint { x: 0.0, y: 0.0, visibility: Visibility::NotLabeled, score: 0.0 }
    }

    pub fn dist_sq(&self, other: &Keypoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// An ordered set of keypoints for one person plus an overall pose score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub keypoints: Vec<Keypoint>,
    pub score: f64,
}

impl Pose {
    pub fn new(keypoints: Vec<Keypoint>, score: f64) -> Self {
        Pose { keypoints, score }
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn num_labeled(&self) -> usize {
        self.keypoints.iter().filter(|k| k.visibility.is_labeled()).count()
    }

    /// Tight bounding box of the labeled keypoints, `None` if none are labeled.
    pub fn labeled_bounds(&self) -> Option<BBox> {
        let mut it = self.keypoints.iter().filter(|k| k.visibility.is_labeled());
        let first = it.next()?;
        let mut b = BBox::new(first.x, first.y, first.x, first.y, 1.0);
        for k in it {
            b.x_min = b.x_min.min(k.x);
            b.y_min = b.y_min.min(k.y);
            b.x_max = b.x_max.max(k.x);
            b.y_max = b.y_max.max(k.y);
        }
        Some(b)
    }

    /// Translates every keypoint by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Pose {
        let keypoints = self
            .keypoints
            .iter()
            .map(|k| Keypoint { x: k.x + dx, y: k.y + dy, ..*k })
            .collect();
        Pose { keypoints, score: self.score }
    }
}

/// Per-keypoint falloff constants for object keypoint similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OksParams {
    pub kappas: Vec<f64>,
}

impl OksParams {
    pub fn new(kappas: Vec<f64>) -> Result<Self> {
        if kappas.is_empty() {
            return Err(Error::invalid("OKS params need at least one kappa"));
        }
        if kappas.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::invalid("OKS kappas must be finite and > 0"));
        }
        Ok(OksParams { kappas })
    }

    pub fn uniform(num_keypoints: usize, kappa: f64) -> Self {
        OksParams { kappas: vec![kappa; num_keypoints] }
    }

    /// The COCO constants, expressed as `kappa = 2 * sigma`.
    pub fn coco() -> Self {
        OksParams { kappas: COCO_SIGMAS.iter().map(|s| 2.0 * s).collect() }
    }

    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }
}

impl Default for OksParams {
    fn default() -> Self {
        OksParams::uniform(COCO_KEYPOINTS, 0.1)
    }
}

/// Intersection over union. Two degenerate boxes give 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Object keypoint similarity of `pred` against `gt`.
///
/// Mean over the labeled ground-truth keypoints of
/// `exp(-d² / (2 · gt_area · kappa²))`; `gt_area` plays the role of the
/// squared object scale.
pub fn oks(pred: &Pose, gt: &Pose, gt_area: f64, params: &OksParams) -> Result<f64> {
    if pred.len() != gt.len() || params.len() != gt.len() {
        return Err(Error::invalid(format!(
            "keypoint count mismatch: pred {}, gt {}, kappas {}",
            pred.len(),
            gt.len(),
            params.len()
        )));
    }
    if !(gt_area > 0.0) {
        return Err(Error::invalid(format!("gt_area must be > 0, got {gt_area}")));
    }
    let mut total = 0.0;
    let mut labeled = 0usize;
    for ((p, g), kappa) in pred.keypoints.iter().zip(&gt.keypoints).zip(&params.kappas) {
        if !g.visibility.is_labeled() {
            continue;
        }
        labeled += 1;
        total += (-p.dist_sq(g) / (2.0 * gt_area * kappa * kappa)).exp();
    }
    if labeled == 0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok(total / labeled as f64)
}

/// Grows one side of `b` so that `width / height == target_w_over_h`, keeping
/// the center fixed. The result may extend past the image; clip separately.
pub fn extend_to_ratio(b: &BBox, target_w_over_h: f64) -> Result<BBox> {
    if !(target_w_over_h.is_finite() && target_w_over_h > 0.0) {
        return Err(Error::invalid(format!("ratio must be > 0, got {target_w_over_h}")));
    }
    let (w, h) = (b.width(), b.height());
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::invalid("cannot extend a degenerate box"));
    }
    let (cx, cy) = b.center();
    let current = w / h;
    let rel = (current - target_w_over_h).abs() / target_w_over_h;
    if rel <= 1e-12 {
        return Ok(*b);
    }
    let out = if current < target_w_over_h {
        let half = 0.5 * h * target_w_over_h;
        BBox { x_min: cx - half, x_max: cx + half, ..*b }
    } else {
        let half = 0.5 * w / target_w_over_h;
        BBox { y_min: cy - half, y_max: cy + half, ..*b }
    };
    Ok(out)
}
