//! Heatmap smoothing, coarse argmax localization and offset fusion.
//!
//! For each keypoint channel the smoothed heatmap's argmax `(col, row)` gives
//! a coarse lattice position; the raw offsets at that single cell refine it to
//! `(col * stride + dx * R, row * stride + dy * R)`.

use ndarray::{Array2, ArrayView2, Axis};

use crate::encoding::{EncodingConfig, HeatmapSet, OffsetSet};
use crate::error::Result;
use crate::geometry::{Keypoint, Pose, Visibility};

/// Default smoothing for predicted maps, in grid cells.
pub const DEFAULT_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPose {
    pub pose: Pose,
    /// Per-keypoint argmax cell `(col, row)`.
    pub coarse_cells: Vec<(usize, usize)>,
    /// Channels whose smoothed map was flat; their argmax came from the tie-break.
    pub low_confidence: Vec<bool>,
}

/// Normalized 1-D Gaussian taps over `[-ceil(3σ), ceil(3σ)]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian blur of every channel with replicate padding.
/// `sigma <= 0` returns a copy of the input.
pub fn gaussian_smooth(h: &HeatmapSet, sigma: f64) -> HeatmapSet {
    if !(sigma > 0.0) {
        return h.clone();
    }
    let taps = gaussian_kernel(sigma);
    let mut out = h.data.clone();
    for (src, mut dst) in h.data.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        let blurred = blur_channel(src, &taps);
        dst.zip_mut_with(&blurred, |d, &s| *d = s as f32);
    }
    HeatmapSet { data: out }
}

fn blur_channel(src: ArrayView2<f32>, taps: &[f64]) -> Array2<f64> {
    let (h, w) = src.dim();
    let radius = (taps.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut horiz = Array2::<f64>::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (t, &wt) in taps.iter().enumerate() {
                let cc = clamp(c as isize + t as isize - radius, w);
                acc += wt * src[[r, cc]] as f64;
            }
            horiz[[r, c]] = acc;
        }
    }
    let mut out = Array2::<f64>::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (t, &wt) in taps.iter().enumerate() {
                let rr = clamp(r as isize + t as isize - radius, h);
                acc += wt * horiz[[rr, c]];
            }
            out[[r, c]] = acc;
        }
    }
    out
}

/// Argmax with ties broken by lowest row, then lowest column. Also reports
/// whether the channel is flat.
fn argmax(channel: ArrayView2<f32>) -> ((usize, usize), f32, bool) {
    let mut best = (0usize, 0usize);
    let mut best_v = f32::NEG_INFINITY;
    let mut min_v = f32::INFINITY;
    for ((r, c), &v) in channel.indexed_iter() {
        if v > best_v {
            best_v = v;
            best = (c, r);
        }
        min_v = min_v.min(v);
    }
    (best, best_v, best_v == min_v)
}

/// Fuses heatmaps and offsets into continuous keypoint coordinates.
pub fn decode(h: &HeatmapSet, o: &OffsetSet, cfg: &EncodingConfig, sigma: f64) -> Result<DecodedPose> {
    o.check_shape(cfg)?;
    decode_with(h, cfg, sigma, |k, col, row| {
        (o.dx[[k, row, col]] as f64 * cfg.radius, o.dy[[k, row, col]] as f64 * cfg.radius)
    })
}

/// Baseline decoder that reports the argmax lattice position with no offset
/// refinement, so its error is bounded below by the lattice quantization.
pub fn decode_heatmap_only(h: &HeatmapSet, cfg: &EncodingConfig, sigma: f64) -> Result<DecodedPose> {
    decode_with(h, cfg, sigma, |_, _, _| (0.0, 0.0))
}

fn decode_with<F>(h: &HeatmapSet, cfg: &EncodingConfig, sigma: f64, offset_at: F) -> Result<DecodedPose>
where
    F: Fn(usize, usize, usize) -> (f64, f64),
{
    cfg.validate()?;
    h.check_shape(cfg)?;
    let smoothed = gaussian_smooth(h, sigma);
    let s = cfg.stride_px();
    let k = cfg.num_keypoints;

    let mut keypoints = Vec::with_capacity(k);
    let mut coarse_cells = Vec::with_capacity(k);
    let mut low_confidence = Vec::with_capacity(k);
    for (idx, channel) in smoothed.data.axis_iter(Axis(0)).enumerate() {
        let ((col, row), peak, flat) = argmax(channel);
        let (ox, oy) = offset_at(idx, col, row);
        let score = if peak.is_finite() { (peak as f64).clamp(0.0, 1.0) } else { 0.0 };
        keypoints.push(Keypoint {
            x: col as f64 * s + ox,
            y: row as f64 * s + oy,
            visibility: Visibility::LabeledVisible,
            score,
        });
        coarse_cells.push((col, row));
        low_confidence.push(flat);
    }
    let pose_score = keypoints.iter().map(|kp| kp.score).sum::<f64>() / k as f64;
    Ok(DecodedPose { pose: Pose::new(keypoints, pose_score), coarse_cells, low_confidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_targets;
    use ndarray::Array3;

    fn cfg(stride: u32, r: f64, w: usize, h: usize, k: usize) -> EncodingConfig {
        EncodingConfig::new(stride, r, w, h, k).unwrap()
    }

    #[test]
    fn kernel_is_normalized() {
        for sigma in [0.3, 1.0, 2.5] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len(), 2 * (3.0 * sigma).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(gaussian_kernel(0.0), vec![1.0]);
    }

    #[test]
    fn smooth_identity_constant_impulse() {
        let mut data = Array3::<f32>::zeros((2, 15, 15));
        data.index_axis_mut(Axis(0), 0).fill(0.37);
        data[[1, 7, 7]] = 1.0;
        let h = HeatmapSet { data };
        assert_eq!(gaussian_smooth(&h, 0.0), h);

        let s = gaussian_smooth(&h, 1.0);
        for &v in s.data.index_axis(Axis(0), 0) {
            assert!((v - 0.37).abs() < 1e-6);
        }
        let taps = gaussian_kernel(1.0);
        let centre = taps[taps.len() / 2] * taps[taps.len() / 2];
        assert!((s.data[[1, 7, 7]] as f64 - centre).abs() < 1e-6);
        let mass: f64 = s.data.index_axis(Axis(0), 1).iter().map(|&v| v as f64).sum();
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn decode_fusion_arithmetic() {
        let c = cfg(8, 8.0, 6, 6, 1);
        let mut h = HeatmapSet::zeros(&c);
        let mut o = OffsetSet::zeros(&c);
        h.data[[0, 3, 2]] = 0.9;
        o.dx[[0, 3, 2]] = 0.25;
        o.dy[[0, 3, 2]] = -0.5;
        let d = decode(&h, &o, &c, 0.0).unwrap();
        let kp = d.pose.keypoints[0];
        assert_eq!((kp.x, kp.y), (18.0, 20.0));
        assert_eq!(d.coarse_cells, vec![(2, 3)]);
        assert!((kp.score - 0.9).abs() < 1e-6);
        assert!((d.pose.score - 0.9).abs() < 1e-6);
        assert_eq!(d.low_confidence, vec![false]);
    }

    #[test]
    fn decode_zero_offsets_is_lattice() {
        let c = cfg(16, 16.0, 5, 5, 2);
        let mut h = HeatmapSet::zeros(&c);
        h.data[[0, 1, 4]] = 1.0;
        h.data[[1, 4, 0]] = 0.5;
        let d = decode(&h, &OffsetSet::zeros(&c), &c, 0.0).unwrap();
        assert_eq!((d.pose.keypoints[0].x, d.pose.keypoints[0].y), (64.0, 16.0));
        assert_eq!((d.pose.keypoints[1].x, d.pose.keypoints[1].y), (0.0, 64.0));
        assert!((d.pose.score - 0.75).abs() < 1e-9);
    }

    #[test]
    fn flat_channel_uses_tie_break() {
        let c = cfg(8, 8.0, 4, 4, 1);
        let h = HeatmapSet::zeros(&c);
        let d = decode(&h, &OffsetSet::zeros(&c), &c, 1.0).unwrap();
        assert_eq!(d.coarse_cells, vec![(0, 0)]);
        assert_eq!(d.low_confidence, vec![true]);
        assert_eq!(d.pose.keypoints[0].score, 0.0);
    }

    #[test]
    fn tie_break_lowest_row_then_col() {
        let c = cfg(8, 8.0, 4, 4, 1);
        let mut h = HeatmapSet::zeros(&c);
        h.data[[0, 2, 1]] = 1.0;
        h.data[[0, 1, 3]] = 1.0;
        h.data[[0, 1, 2]] = 1.0;
        let d = decode_heatmap_only(&h, &c, 0.0).unwrap();
        assert_eq!(d.coarse_cells, vec![(2, 1)]);
    }

    #[test]
    fn score_is_clamped() {
        let c = cfg(8, 8.0, 4, 4, 1);
        let mut h = HeatmapSet::zeros(&c);
        h.data[[0, 1, 1]] = 3.0;
        let d = decode_heatmap_only(&h, &c, 0.0).unwrap();
        assert_eq!(d.pose.keypoints[0].score, 1.0);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let c = cfg(8, 8.0, 4, 4, 1);
        let other = cfg(8, 8.0, 5, 4, 1);
        assert!(decode(&HeatmapSet::zeros(&other), &OffsetSet::zeros(&c), &c, 0.0).is_err());
        assert!(decode(&HeatmapSet::zeros(&c), &OffsetSet::zeros(&other), &c, 0.0).is_err());
    }

    #[test]
    fn heatmap_only_examples() {
        let c = cfg(8, 8.0, 8, 8, 1);
        for (g, expect) in [((16.0, 16.0), (16.0, 16.0)), ((19.0, 16.0), (16.0, 16.0))] {
            let gt = Pose::new(vec![Keypoint::visible(g.0, g.1)], 1.0);
            let (h, _) = encode_targets(&gt, &c).unwrap();
            let d = decode_heatmap_only(&h, &c, DEFAULT_SIGMA).unwrap();
            assert_eq!((d.pose.keypoints[0].x, d.pose.keypoints[0].y), expect);
        }
    }

    #[test]
    fn off_peak_offsets_are_ignored() {
        let c = cfg(8, 8.0, 8, 8, 1);
        let gt = Pose::new(vec![Keypoint::visible(21.3, 30.9)], 1.0);
        let (h, o) = encode_targets(&gt, &c).unwrap();
        let base = decode(&h, &o, &c, 1.0).unwrap();
        let (col, row) = base.coarse_cells[0];
        let mut corrupted = o.clone();
        for ((_, r, cc), v) in corrupted.dx.indexed_iter_mut() {
            if (cc, r) != (col, row) {
                *v = 123.0;
            }
        }
        corrupted.dy.iter_mut().for_each(|v| *v = -7.0);
        corrupted.dy[[0, row, col]] = o.dy[[0, row, col]];
        assert_eq!(decode(&h, &corrupted, &c, 1.0).unwrap(), base);
    }

    #[test]
    fn smoothing_preserves_strict_peak() {
        let c = cfg(8, 8.0, 9, 9, 1);
        // on-lattice keypoint: the positive disk is symmetric about the peak cell
        let gt = Pose::new(vec![Keypoint::visible(32.0, 40.0)], 1.0);
        let (h, _) = encode_targets(&gt, &c).unwrap();
        for sigma in [0.25, 0.5, 1.0] {
            let d = decode_heatmap_only(&h, &c, sigma).unwrap();
            assert_eq!(d.coarse_cells, vec![(4, 5)]);
        }
    }
}
