//! # posefuse
//!
//! Post-processing for top-down human pose estimation that localizes keypoints
//! in continuous image space by fusing a coarse classification heatmap with a
//! per-cell offset field.
//!
//! The crate covers everything around the network:
//!
//! - [`encoding`]: disk-shaped classification targets and normalized offset
//!   targets, plus the Smooth-L1 loss used to score predicted maps.
//! - [`decoding`]: Gaussian smoothing, argmax coarse localization and offset
//!   fusion, with a heatmap-only baseline for quantization experiments.
//! - [`gbg`]: greedy box generation, a candidate filter that keeps low-score
//!   but well-localized person boxes next to confident ones.
//! - [`nms`]: pose deduplication on combined OKS and IoU criteria.
//! - [`tracking`]: frame-to-frame identity assignment from box overlap and
//!   appearance embeddings.
//! - [`eval`]: OKS average precision and keypoint-level MOTA.
//! - [`synth`]: a seeded scene generator that stands in for a trained network.
//! - [`io`]: the binary tensor format and the pose JSON schema.
//!
//! Shared geometric types live in [`geometry`] and are re-exported at the
//! crate root.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoding;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod gbg;
pub mod geometry;
pub mod io;
pub mod nms;
pub mod pipeline;
pub mod synth;
pub mod tracking;

pub use decoding::{decode, decode_heatmap_only, gaussian_smooth, DecodedPose};
pub use encoding::{encode_targets, grid_to_image, smooth_l1_loss, EncodingConfig, HeatmapSet, OffsetSet};
pub use error::{Error, Result};
pub use eval::{evaluate_ap, evaluate_mota, ApResult, GroundTruth, MotaCounts, MotaResult, TrackedPose};
pub use gbg::{gbg_select, GbgConfig, GbgOutput};
pub use geometry::{extend_to_ratio, iou, oks, BBox, Keypoint, OksParams, Pose, Visibility};
pub use nms::{final_score, oks_iou_nms, NmsConfig, ScoredInstance};
pub use tracking::{associate, similarity, Association, Detection, Embedding, Track, TrackConfig, TrackState, Tracker};
