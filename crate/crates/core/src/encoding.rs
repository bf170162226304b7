//! Classification and offset targets on a strided lattice.
//!
//! Grid cell `(col, row)` sits at image position `(col * stride, row * stride)`.
//! For every keypoint `g` and cell position `x`, the classification target is
//! 1 inside the closed disk `|x - g| <= R` and 0 outside; the offset target is
//! `(g - x) / R` inside the disk and 0 outside. `R` is measured in image pixels.

use ndarray::{Array3, ArrayView3, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

pub const ALLOWED_STRIDES: [u32; 6] = [1, 2, 4, 8, 16, 32];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    /// Image pixels per grid cell.
    pub stride: u32,
    /// Disk radius in image pixels.
    pub radius: f64,
    pub map_w: usize,
    pub map_h: usize,
    pub num_keypoints: usize,
}

impl EncodingConfig {
    pub fn new(stride: u32, radius: f64, map_w: usize, map_h: usize, num_keypoints: usize) -> Result<Self> {
        let cfg = EncodingConfig { stride, radius, map_w, map_h, num_keypoints };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Smallest map whose lattice covers `[0, image_w] x [0, image_h]`.
    pub fn covering(image_w: f64, image_h: f64, stride: u32, radius: f64, num_keypoints: usize) -> Result<Self> {
        if !(image_w > 0.0 && image_h > 0.0) {
            return Err(Error::invalid("image extent must be positive"));
        }
        let s = stride as f64;
        let map_w = (image_w / s).ceil() as usize + 1;
        let map_h = (image_h / s).ceil() as usize + 1;
        EncodingConfig::new(stride, radius, map_w, map_h, num_keypoints)
    }

    pub fn validate(&self) -> Result<()> {
        if !ALLOWED_STRIDES.contains(&self.stride) {
            return Err(Error::invalid(format!("stride {} not in {:?}", self.stride, ALLOWED_STRIDES)));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::invalid(format!("radius must be > 0, got {}", self.radius)));
        }
        if self.map_w == 0 || self.map_h == 0 || self.num_keypoints == 0 {
            return Err(Error::invalid("map dimensions and keypoint count must be >= 1"));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.num_keypoints, self.map_h, self.map_w)
    }

    pub fn stride_px(&self) -> f64 {
        self.stride as f64
    }
}

/// `K x H x W` classification scores.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSet {
    pub data: Array3<f32>,
}

/// Paired `K x H x W` offset fields in units of the disk radius.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetSet {
    pub dx: Array3<f32>,
    pub dy: Array3<f32>,
}

impl HeatmapSet {
    pub fn zeros(cfg: &EncodingConfig) -> Self {
        HeatmapSet { data: Array3::zeros(cfg.shape()) }
    }

    pub fn check_shape(&self, cfg: &EncodingConfig) -> Result<()> {
        check_dims("heatmap", self.data.dim(), cfg)
    }
}

impl OffsetSet {
    pub fn zeros(cfg: &EncodingConfig) -> Self {
        OffsetSet { dx: Array3::zeros(cfg.shape()), dy: Array3::zeros(cfg.shape()) }
    }

    pub fn check_shape(&self, cfg: &EncodingConfig) -> Result<()> {
        check_dims("offset dx", self.dx.dim(), cfg)?;
        check_dims("offset dy", self.dy.dim(), cfg)
    }
}

fn check_dims(what: &str, dim: (usize, usize, usize), cfg: &EncodingConfig) -> Result<()> {
    if dim != cfg.shape() {
        return Err(Error::invalid(format!("{what} shape {dim:?} does not match config {:?}", cfg.shape())));
    }
    Ok(())
}

pub fn grid_to_image(col: usize, row: usize, cfg: &EncodingConfig) -> Result<(f64, f64)> {
    if col >= cfg.map_w || row >= cfg.map_h {
        return Err(Error::invalid(format!(
            "cell ({col}, {row}) outside {}x{} map",
            cfg.map_w, cfg.map_h
        )));
    }
    let s = cfg.stride_px();
    Ok((col as f64 * s, row as f64 * s))
}

/// Builds the target maps for a single person.
///
/// Unlabeled keypoints leave their channels at zero.
pub fn encode_targets(gt: &Pose, cfg: &EncodingConfig) -> Result<(HeatmapSet, OffsetSet)> {
    cfg.validate()?;
    if gt.len() != cfg.num_keypoints {
        return Err(Error::invalid(format!(
            "pose has {} keypoints, config expects {}",
            gt.len(),
            cfg.num_keypoints
        )));
    }
    let mut heat = HeatmapSet::zeros(cfg);
    let mut off = OffsetSet::zeros(cfg);
    let s = cfg.stride_px();
    let r = cfg.radius;
    let r2 = r * r;

    for (k, kp) in gt.keypoints.iter().enumerate() {
        if !kp.visibility.is_labeled() || !(kp.x.is_finite() && kp.y.is_finite()) {
            continue;
        }
        // Only cells inside the disk's bounding square can be positive.
        let Some((c0, c1)) = cell_span(kp.x - r, kp.x + r, s, cfg.map_w) else { continue };
        let Some((r0, r1)) = cell_span(kp.y - r, kp.y + r, s, cfg.map_h) else { continue };
        for row in r0..=r1 {
            let yi = row as f64 * s;
            for col in c0..=c1 {
                let xi = col as f64 * s;
                let (ex, ey) = (kp.x - xi, kp.y - yi);
                if ex * ex + ey * ey <= r2 {
                    heat.data[[k, row, col]] = 1.0;
                    off.dx[[k, row, col]] = (ex / r) as f32;
                    off.dy[[k, row, col]] = (ey / r) as f32;
                }
            }
        }
    }
    Ok((heat, off))
}

/// Inclusive range of lattice indices whose position falls in `[lo, hi]`.
fn cell_span(lo: f64, hi: f64, stride: f64, n: usize) -> Option<(usize, usize)> {
    let first = (lo / stride).ceil().max(0.0);
    let last = (hi / stride).floor().min((n - 1) as f64);
    if first > last {
        return None;
    }
    Some((first as usize, last as usize))
}

/// Smooth-L1 of a single residual.
pub fn smooth_l1(e: f64) -> f64 {
    let a = e.abs();
    if a < 1.0 {
        0.5 * a * a
    } else {
        a - 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    /// Number of elements that entered the mean.
    pub count: usize,
    /// Set when a mask was supplied but selected nothing; `loss` is then 0.
    pub empty_mask: bool,
}

/// Mean Smooth-L1 over the elements selected by `mask` (all elements if `None`).
pub fn smooth_l1_loss(
    pred: ArrayView3<f32>,
    target: ArrayView3<f32>,
    mask: Option<ArrayView3<bool>>,
) -> Result<LossValue> {
    if pred.dim() != target.dim() {
        return Err(Error::invalid(format!("pred {:?} vs target {:?}", pred.dim(), target.dim())));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    match mask {
        Some(m) => {
            if m.dim() != pred.dim() {
                return Err(Error::invalid(format!("mask {:?} vs pred {:?}", m.dim(), pred.dim())));
            }
            Zip::from(&pred).and(&target).and(&m).for_each(|&p, &t, &keep| {
                if keep {
                    sum += smooth_l1(p as f64 - t as f64);
                    count += 1;
                }
            });
            if count == 0 {
                return Ok(LossValue { loss: 0.0, count, empty_mask: true });
            }
        }
        None => {
            Zip::from(&pred).and(&target).for_each(|&p, &t| {
                sum += smooth_l1(p as f64 - t as f64);
                count += 1;
            });
            if count == 0 {
                return Ok(LossValue { loss: 0.0, count, empty_mask: false });
            }
        }
    }
    Ok(LossValue { loss: sum / count as f64, count, empty_mask: false })
}

/// Offset loss restricted to the positive disk of the target heatmap, summed
/// over both axes.
pub fn offset_loss(pred: &OffsetSet, target: &OffsetSet, target_heat: &HeatmapSet) -> Result<LossValue> {
    let mask = target_heat.data.mapv(|v| v > 0.5);
    let lx = smooth_l1_loss(pred.dx.view(), target.dx.view(), Some(mask.view()))?;
    let ly = smooth_l1_loss(pred.dy.view(), target.dy.view(), Some(mask.view()))?;
    Ok(LossValue { loss: lx.loss + ly.loss, count: lx.count, empty_mask: lx.empty_mask })
}
