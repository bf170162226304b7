//! Seeded synthetic scenes that stand in for a trained detector and pose
//! network: stick-figure people, rendered target maps with additive noise,
//! jittered candidate boxes and appearance embeddings.
//!
//! # Randomness
//!
//! Every random draw comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded
//! with `seed_from_u64(cfg.seed)` and then moved to a dedicated stream with
//! `set_stream(stream_id(domain, frame, person))`. Stream ids pack
//! `domain << 56 | frame << 24 | person`, so adding people or frames never
//! perturbs draws made for others. Normal variates use
//! `rand_distr::StandardNormal`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::encoding::{encode_targets, EncodingConfig, HeatmapSet, OffsetSet};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, Keypoint, Pose, COCO_KEYPOINTS};
use crate::tracking::Embedding;

/// COCO-ordered joint positions relative to the body center, in units of the
/// person's height.
pub const STICK_FIGURE: [(f64, f64); COCO_KEYPOINTS] = [
    (0.00, -0.42), // nose
    (0.03, -0.45), // left eye
    (-0.03, -0.45),
    (0.06, -0.43), // left ear
    (-0.06, -0.43),
    (0.12, -0.30), // left shoulder
    (-0.12, -0.30),
    (0.17, -0.12), // left elbow
    (-0.17, -0.12),
    (0.19, 0.03), // left wrist
    (-0.19, 0.03),
    (0.08, 0.03), // left hip
    (-0.08, 0.03),
    (0.09, 0.25), // left knee
    (-0.09, 0.25),
    (0.09, 0.47), // left ankle
    (-0.09, 0.47),
];

/// Box dilation applied around the tight keypoint bounds.
pub const BOX_DILATION: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    Placement = 1,
    Maps = 2,
    Candidates = 3,
    Embedding = 4,
    EmbeddingNoise = 5,
}

pub fn stream_id(domain: StreamDomain, frame: u32, person: u32) -> u64 {
    ((domain as u64) << 56) | ((frame as u64 & 0xFFFF_FFFF) << 24) | (person as u64 & 0xFF_FFFF)
}

/// A ChaCha8 generator positioned on the stream for `(domain, frame, person)`.
pub fn stream_rng(seed: u64, domain: StreamDomain, frame: u32, person: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(domain, frame, person));
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_people: usize,
    pub image_w: f64,
    pub image_h: f64,
    pub min_height: f64,
    pub max_height: f64,
    /// Per-joint jitter, as a fraction of person height.
    pub joint_jitter: f64,
    /// Maximum per-axis speed in pixels per frame.
    pub max_speed: f64,
    /// Additive noise on rendered heatmaps and offsets.
    pub map_noise: f64,
    /// Candidate box corner jitter, as a fraction of box size.
    pub box_jitter: f64,
    /// How closely candidate scores follow their IoU to ground truth, in `[0, 1]`.
    pub score_iou_corr: f64,
    pub candidates_per_gt: usize,
    pub embedding_dim: usize,
    pub embedding_noise: f64,
    pub max_retries: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 42,
            n_people: 3,
            image_w: 640.0,
            image_h: 480.0,
            min_height: 120.0,
            max_height: 200.0,
            joint_jitter: 0.01,
            max_speed: 3.0,
            map_noise: 0.0,
            box_jitter: 0.0,
            score_iou_corr: 0.5,
            candidates_per_gt: 1,
            embedding_dim: 8,
            embedding_noise: 0.02,
            max_retries: 200,
        }
    }
}

/// One frame of ground truth: parallel vectors indexed by person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub poses: Vec<Pose>,
    pub boxes: Vec<BBox>,
    pub ids: Vec<u64>,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub frames: Vec<Scene>,
    /// Reference appearance per person id.
    pub embeddings: Vec<Embedding>,
}

/// Tight keypoint box scaled by [`BOX_DILATION`] about its center.
pub fn pose_box(pose: &Pose) -> BBox {
    let tight = pose.labeled_bounds().unwrap_or(BBox::new(0.0, 0.0, 0.0, 0.0, 1.0));
    let (cx, cy) = tight.center();
    let hw = 0.5 * tight.width() * BOX_DILATION;
    let hh = 0.5 * tight.height() * BOX_DILATION;
    BBox::new(cx - hw, cy - hh, cx + hw, cy + hh, 1.0)
}

/// Stick figure of the given height centered at the origin.
pub fn figure(height: f64, jitter: f64, rng: &mut impl Rng) -> Pose {
    let keypoints = STICK_FIGURE
        .iter()
        .map(|&(x, y)| {
            let jx = jitter * normal(rng);
            let jy = jitter * normal(rng);
            Keypoint::visible((x + jx) * height, (y + jy) * height)
        })
        .collect();
    Pose::new(keypoints, 1.0)
}

struct Person {
    template: Pose,
    start: (f64, f64),
    velocity: (f64, f64),
}

impl Person {
    fn at(&self, frame: usize) -> Pose {
        let t = frame as f64;
        self.template.translated(self.start.0 + self.velocity.0 * t, self.start.1 + self.velocity.1 * t)
    }
}

fn inside(b: &BBox, cfg: &ScenarioConfig) -> bool {
    b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_max <= cfg.image_w && b.y_max <= cfg.image_h
}

fn place_people(cfg: &ScenarioConfig, n_frames: usize) -> Result<Vec<Person>> {
    if cfg.min_height <= 0.0 || cfg.max_height < cfg.min_height {
        return Err(Error::invalid("person height range is invalid"));
    }
    let mut people: Vec<Person> = Vec::with_capacity(cfg.n_people);
    for p in 0..cfg.n_people {
        let mut rng = stream_rng(cfg.seed, StreamDomain::Placement, 0, p as u32);
        let mut placed = None;
        for _ in 0..cfg.max_retries.max(1) {
            let height = rng.random_range(cfg.min_height..=cfg.max_height);
            let template = figure(height, cfg.joint_jitter, &mut rng);
            let start = (rng.random_range(0.0..cfg.image_w), rng.random_range(0.0..cfg.image_h));
            let velocity = if cfg.max_speed > 0.0 {
                (rng.random_range(-cfg.max_speed..=cfg.max_speed), rng.random_range(-cfg.max_speed..=cfg.max_speed))
            } else {
                (0.0, 0.0)
            };
            let cand = Person { template, start, velocity };
            let ok = (0..n_frames.max(1)).all(|f| {
                let b = pose_box(&cand.at(f));
                inside(&b, cfg) && people.iter().all(|o| iou(&b, &pose_box(&o.at(f))) == 0.0)
            });
            if ok {
                placed = Some(cand);
                break;
            }
        }
        match placed {
            Some(person) => people.push(person),
            None => {
                return Err(Error::Generation(format!(
                    "could not place person {p} after {} attempts",
                    cfg.max_retries
                )))
            }
        }
    }
    Ok(people)
}

fn scene_at(people: &[Person], frame: usize) -> Scene {
    let poses: Vec<Pose> = people.iter().map(|p| p.at(frame)).collect();
    let boxes = poses.iter().map(pose_box).collect();
    Scene { poses, boxes, ids: (0..people.len() as u64).collect() }
}

/// A single frame of `n_people` non-overlapping people inside the image.
pub fn generate_scene(cfg: &ScenarioConfig) -> Result<Scene> {
    let people = place_people(cfg, 1)?;
    Ok(scene_at(&people, 0))
}

fn reference_embeddings(cfg: &ScenarioConfig, n: usize) -> Vec<Embedding> {
    (0..n)
        .map(|p| {
            let mut rng = stream_rng(cfg.seed, StreamDomain::Embedding, 0, p as u32);
            Embedding((0..cfg.embedding_dim).map(|_| (2.0 * normal(&mut rng)) as f32).collect())
        })
        .collect()
}

/// People moving linearly for `n_frames`, never overlapping and never leaving
/// the image.
pub fn generate_sequence(cfg: &ScenarioConfig, n_frames: usize) -> Result<Sequence> {
    let people = place_people(cfg, n_frames)?;
    let frames = (0..n_frames).map(|f| scene_at(&people, f)).collect();
    Ok(Sequence { frames, embeddings: reference_embeddings(cfg, people.len()) })
}

/// Two people of equal size walking toward each other along the same row,
/// plus a third standing still below them.
///
/// The horizontal speed is chosen so that at the crossing frame each walker's
/// next box lands exactly on the other's current box, which is the worst case
/// for a purely spatial matcher.
pub fn crossing_sequence(cfg: &ScenarioConfig, n_frames: usize) -> Result<Sequence> {
    if n_frames < 4 {
        return Err(Error::invalid("crossing sequence needs at least 4 frames"));
    }
    const MARGIN: f64 = 10.0;
    let mut rng = stream_rng(cfg.seed, StreamDomain::Placement, 0, 0);
    let height = cfg.max_height;
    let walker = figure(height, cfg.joint_jitter, &mut rng);
    let bystander = figure(height, cfg.joint_jitter, &mut rng);
    let walker_box = pose_box(&walker);
    let bystander_box = pose_box(&bystander);
    let w = walker_box.width();

    // Walker A starts at the left margin, B at the right one; they meet
    // between frames `cross` and `cross + 1`.
    let cross = (n_frames / 2 - 1) as f64;
    let gap = cfg.image_w - w - 2.0 * MARGIN;
    let speed = gap / (2.0 * cross + 1.0);
    // Consecutive boxes of one walker must keep IoU >= 0.5.
    if gap <= 0.0 || speed > w / 3.0 {
        return Err(Error::Generation(format!(
            "image width {} cannot host a {n_frames}-frame crossing of {w:.1} px wide people",
            cfg.image_w
        )));
    }
    let row = MARGIN - walker_box.y_min;
    let left_x = MARGIN - walker_box.x_min;
    let bystander_y = MARGIN + walker_box.height() + MARGIN - bystander_box.y_min;
    let people = [
        Person { template: walker.clone(), start: (left_x, row), velocity: (speed, 0.0) },
        Person { template: walker, start: (left_x + gap, row), velocity: (-speed, 0.0) },
        Person { template: bystander, start: (0.5 * cfg.image_w, bystander_y), velocity: (0.0, 0.0) },
    ];
    for f in 0..n_frames {
        for p in &people {
            if !inside(&pose_box(&p.at(f)), cfg) {
                return Err(Error::Generation("crossing scene leaves the image".into()));
            }
        }
    }
    let frames = (0..n_frames).map(|f| scene_at(&people, f)).collect();
    Ok(Sequence { frames, embeddings: reference_embeddings(cfg, people.len()) })
}

/// Per-detection embedding: the person's reference vector plus i.i.d. noise.
pub fn observe_embedding(cfg: &ScenarioConfig, seq: &Sequence, frame: usize, person: usize) -> Embedding {
    let mut rng = stream_rng(cfg.seed, StreamDomain::EmbeddingNoise, frame as u32, person as u32);
    let base = &seq.embeddings[person];
    Embedding(base.0.iter().map(|&v| v + (cfg.embedding_noise * normal(&mut rng)) as f32).collect())
}

/// Target maps for `gt` with i.i.d. Gaussian noise of standard deviation
/// `sigma` added to the heatmap and both offset fields. `sigma == 0` returns
/// the exact targets.
pub fn render_maps(gt: &Pose, enc: &EncodingConfig, sigma: f64, rng: &mut impl Rng) -> Result<(HeatmapSet, OffsetSet)> {
    let (mut heat, mut off) = encode_targets(gt, enc)?;
    if sigma > 0.0 {
        for v in heat.data.iter_mut().chain(off.dx.iter_mut()).chain(off.dy.iter_mut()) {
            *v += (sigma * normal(rng)) as f32;
        }
    }
    Ok((heat, off))
}

/// Candidate boxes around each ground-truth box.
///
/// Each ground truth gets `candidates_per_gt` copies whose corners move by
/// Gaussian noise of `box_jitter` times the box size. A candidate's score is
/// its IoU to the ground truth minus a half-normal penalty that shrinks as
/// `score_iou_corr` approaches 1. With jitter and at least two candidates the
/// set is rigged so that the best-localized candidate scores below 0.8 while
/// the runner-up scores above it.
pub fn generate_candidates(gt_boxes: &[BBox], cfg: &ScenarioConfig, frame: u32) -> Vec<BBox> {
    let m = cfg.candidates_per_gt;
    let mut out = Vec::with_capacity(gt_boxes.len() * m);
    for (p, gt) in gt_boxes.iter().enumerate() {
        let mut rng = stream_rng(cfg.seed, StreamDomain::Candidates, frame, p as u32);
        let (w, h) = (gt.width(), gt.height());
        let score_noise = (1.0 - cfg.score_iou_corr.clamp(0.0, 1.0)) * (4.0 * cfg.box_jitter).min(1.0);
        let mut group: Vec<BBox> = (0..m)
            .map(|_| {
                let j = cfg.box_jitter;
                let x0 = gt.x_min + j * w * normal(&mut rng);
                let y0 = gt.y_min + j * h * normal(&mut rng);
                let x1 = gt.x_max + j * w * normal(&mut rng);
                let y1 = gt.y_max + j * h * normal(&mut rng);
                let mut b = BBox::new(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1), 1.0);
                let overlap = iou(&b, gt);
                b.score = (overlap - score_noise * normal(&mut rng).abs()).clamp(0.0, 1.0);
                b
            })
            .collect();
        if m >= 2 && cfg.box_jitter > 0.0 {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| iou(&group[b], gt).total_cmp(&iou(&group[a], gt)).then(a.cmp(&b)));
            let best = order[0];
            let runner_up = order[1];
            group[best].score = group[best].score.min(0.5 + 0.25 * rng.random::<f64>());
            group[runner_up].score = group[runner_up].score.max(0.85 + 0.1 * rng.random::<f64>());
        }
        out.extend(group);
    }
    out
}

/// Simulated pose estimator: maps the ground-truth pose from `gt_box` into
/// `roi`, so keypoint error grows with box misalignment.
pub fn pose_through_box(gt: &Pose, gt_box: &BBox, roi: &BBox) -> Pose {
    let sx = if gt_box.width() > 0.0 { roi.width() / gt_box.width() } else { 1.0 };
    let sy = if gt_box.height() > 0.0 { roi.height() / gt_box.height() } else { 1.0 };
    let keypoints = gt
        .keypoints
        .iter()
        .map(|k| Keypoint { x: roi.x_min + (k.x - gt_box.x_min) * sx, y: roi.y_min + (k.y - gt_box.y_min) * sy, ..*k })
        .collect();
    Pose::new(keypoints, gt.score)
}
