//! Greedy box generation: a replacement for score NMS on raw detector output
//! that keeps low-score boxes sitting close to confident ones.
//!
//! The four stages run in order:
//!
//! 1. drop boxes whose shorter side is below `min_side`;
//! 2. every box with score above `egt_score` becomes an equivalent ground
//!    truth (EGT) and is kept;
//! 3. a non-EGT box survives only if its IoU with at least one EGT box is at
//!    least `egt_iou`;
//! 4. survivors are grouped greedily by descending score: the best ungrouped
//!    box seeds a group and collects every ungrouped box with IoU at least
//!    `group_iou` against the seed. Each group keeps its `top_n` best boxes.
//!
//! When no box reaches EGT status the single best stage-1 survivor is kept and
//! [`GbgOutput::fallback`] is set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbgConfig {
    pub min_side: f64,
    pub egt_score: f64,
    pub egt_iou: f64,
    pub group_iou: f64,
    pub top_n: usize,
}

impl Default for GbgConfig {
    fn default() -> Self {
        GbgConfig { min_side: 0.0, egt_score: 0.8, egt_iou: 0.5, group_iou: 0.7, top_n: 4 }
    }
}

impl GbgConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("egt_score", self.egt_score), ("egt_iou", self.egt_iou), ("group_iou", self.group_iou)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.min_side >= 0.0) {
            return Err(Error::invalid("min_side must be >= 0"));
        }
        if self.top_n == 0 {
            return Err(Error::invalid("top_n must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GbgOutput {
    /// EGT boxes by score, then group survivors group by group.
    pub kept: Vec<BBox>,
    pub egt: Vec<BBox>,
    /// No EGT existed; `kept` holds only the best stage-1 survivor.
    pub fallback: bool,
}

pub fn gbg_select(candidates: &[BBox], cfg: &GbgConfig) -> GbgOutput {
    let mut pool: Vec<BBox> = candidates
        .iter()
        .filter(|b| b.width().min(b.height()) >= cfg.min_side)
        .copied()
        .collect();
    if pool.is_empty() {
        return GbgOutput::default();
    }
    pool.sort_by(|a, b| a.rank_cmp(b));

    let (egt, rest): (Vec<BBox>, Vec<BBox>) = pool.iter().partition(|b| b.score > cfg.egt_score);
    if egt.is_empty() {
        return GbgOutput { kept: vec![pool[0]], egt, fallback: true };
    }

    // `rest` inherits the sorted order, so seeds come out highest-score first.
    let near_egt: Vec<BBox> = rest
        .into_iter()
        .filter(|b| egt.iter().any(|e| iou(b, e) >= cfg.egt_iou))
        .collect();

    let mut kept = egt.clone();
    let mut grouped = vec![false; near_egt.len()];
    for seed_idx in 0..near_egt.len() {
        if grouped[seed_idx] {
            continue;
        }
        let seed = near_egt[seed_idx];
        let mut taken = 0;
        for j in seed_idx..near_egt.len() {
            if grouped[j] || (j != seed_idx && iou(&seed, &near_egt[j]) < cfg.group_iou) {
                continue;
            }
            grouped[j] = true;
            if taken < cfg.top_n {
                kept.push(near_egt[j]);
                taken += 1;
            }
        }
    }
    GbgOutput { kept, egt, fallback: false }
}
