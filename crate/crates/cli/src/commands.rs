use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use posefuse::io::json::{BoxFrameJson, BoxJson, FrameJson, InstanceJson};
use posefuse::io::{self, read_json, read_tensor, write_json, write_tensor, BoxDocument, MetricReport, PoseDocument};
use posefuse::nms::nms_indices;
use posefuse::pipeline::{self, PipelineConfig};
use posefuse::synth::{self, ScenarioConfig, Sequence};
use posefuse::*;

use crate::{Command, GbgParams, GridArgs, NmsParams, ScenarioArgs, TrackParams};

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UndefinedMetric(_) | Error::UndefinedSimilarity => 3,
        _ => 2,
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth_cmd(&a.scenario, &a.out_dir),
        Command::Encode(a) => {
            let doc: PoseDocument = load(&a.poses)?;
            let inst = pick(&doc, a.frame, a.instance)?;
            let enc = EncodingConfig::covering(a.width, a.height, a.grid.stride, radius(&a.grid), doc.num_keypoints)?;
            let (h, o) = encode_targets(&inst.pose, &enc)?;
            write_tensor(h.data.view().into_dyn(), &a.out_heatmaps)?;
            write_tensor(io::offsets_to_tensor(&o)?.view().into_dyn(), &a.out_offsets)
        }
        Command::Decode(a) => {
            let heat = io::heatmap_from_tensor(load_tensor(&a.heatmaps)?)?;
            let (k, map_h, map_w) = heat.data.dim();
            let enc = EncodingConfig::new(a.grid.stride, radius(&a.grid), map_w, map_h, k)?;
            let decoded = match (&a.offsets, a.no_offset) {
                (Some(p), false) => decode(&heat, &io::offsets_from_tensor(load_tensor(p)?)?, &enc, a.sigma)?,
                _ => decode_heatmap_only(&heat, &enc, a.sigma)?,
            };
            let flat = decoded.low_confidence.iter().filter(|&&f| f).count();
            if flat > 0 {
                eprintln!("warning: {flat} of {k} channels are flat");
            }
            if let Some(gt_path) = &a.gt {
                let gt_doc: PoseDocument = load(gt_path)?;
                let gt = pick(&gt_doc, a.gt_frame, a.gt_instance)?;
                println!("mean_error_px {:.6}", mean_error(&decoded.pose, &gt.pose)?);
            }
            let s = enc.stride_px();
            let extent = BBox::new(0.0, 0.0, (map_w - 1) as f64 * s, (map_h - 1) as f64 * s, 1.0);
            let inst = ScoredInstance::new(extent, decoded.pose)?;
            let mut doc = PoseDocument::new(k);
            doc.frames.push(FrameJson { frame: 0, instances: vec![InstanceJson::from_instance(&inst, None, None)] });
            write_json(&doc, &a.out)
        }
        Command::Gbg(a) => {
            let doc: BoxDocument = load(&a.boxes)?;
            let cfg = gbg_config(&a.params);
            cfg.validate()?;
            let mut out = BoxDocument::new();
            for f in &doc.frames {
                let boxes: Vec<BBox> = f.boxes.iter().map(BoxJson::to_box).collect();
                for b in &boxes {
                    b.validate()?;
                }
                let sel = gbg_select(&boxes, &cfg);
                out.frames.push(BoxFrameJson {
                    frame: f.frame,
                    boxes: sel.kept.iter().map(BoxJson::from_box).collect(),
                    fallback: sel.fallback,
                });
            }
            write_json(&out, &a.out)
        }
        Command::Nms(a) => {
            let doc: PoseDocument = load(&a.poses)?;
            let cfg = nms_config(&a.params, doc.num_keypoints)?;
            let mut out = PoseDocument::new(doc.num_keypoints);
            for f in &doc.frames {
                let insts = f.instances.iter().map(InstanceJson::to_instance).collect::<Result<Vec<_>>>()?;
                let keep = nms_indices(&insts, &cfg);
                out.frames.push(FrameJson { frame: f.frame, instances: keep.iter().map(|&i| f.instances[i].clone()).collect() });
            }
            write_json(&out, &a.out)
        }
        Command::Track(a) => {
            let doc: PoseDocument = load(&a.poses)?;
            let cfg = track_config(&a.params);
            let mut tracker = Tracker::new(cfg.clone());
            let mut out = PoseDocument::new(doc.num_keypoints);
            for f in sorted_frames(&doc) {
                let mut dets = Vec::with_capacity(f.instances.len());
                for inst in &f.instances {
                    let embedding = match (&inst.embedding, cfg.lambda_spatial == 1.0) {
                        (Some(e), _) => Embedding(e.clone()),
                        (None, true) => Embedding(Vec::new()),
                        (None, false) => return Err(Error::Schema(format!("frame {}: instance without embedding", f.frame))),
                    };
                    dets.push(Detection { instance: inst.to_instance()?, embedding });
                }
                let ids = tracker.step(&dets)?;
                let instances = f
                    .instances
                    .iter()
                    .zip(ids)
                    .map(|(i, id)| InstanceJson { track_id: Some(id), ..i.clone() })
                    .collect();
                out.frames.push(FrameJson { frame: f.frame, instances });
            }
            write_json(&out, &a.out)
        }
        Command::Eval(a) => {
            let pred: PoseDocument = load(&a.pred)?;
            let gt: PoseDocument = load(&a.gt)?;
            if pred.num_keypoints != gt.num_keypoints {
                return Err(Error::Schema(format!(
                    "prediction has {} keypoints, ground truth {}",
                    pred.num_keypoints, gt.num_keypoints
                )));
            }
            let params = oks_params(a.coco_kappa, gt.num_keypoints)?;
            let report = evaluate(&pred, &gt, &params, a.mota_thresh)?;
            let text = io::json::to_json_string(&report)?;
            match &a.out {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Pipeline(a) => {
            let nms = nms_config(&a.nms, posefuse::geometry::COCO_KEYPOINTS)?;
            let cfg = PipelineConfig {
                scenario: scenario(&a.scenario),
                n_frames: a.scenario.frames,
                stride: a.grid.stride,
                radius: radius(&a.grid),
                sigma: a.sigma,
                use_offsets: !a.no_offset,
                roi_ratio: a.ratio,
                gbg: gbg_config(&a.gbg),
                nms,
                track: track_config(&a.track),
                mota_thresh: a.mota_thresh,
            };
            cfg.gbg.validate()?;
            let out = pipeline::run_on_sequence(&cfg, sequence(&a.scenario)?)?;
            let mut doc = PoseDocument::new(posefuse::geometry::COCO_KEYPOINTS);
            for (f, fo) in out.frames.iter().enumerate() {
                let instances = fo
                    .detections
                    .iter()
                    .zip(&fo.track_ids)
                    .map(|(d, &id)| InstanceJson::from_instance(&d.instance, Some(id), Some(&d.embedding)))
                    .collect();
                doc.frames.push(FrameJson { frame: f as u64, instances });
            }
            let mut report = MetricReport {
                schema_version: io::json::SCHEMA_VERSION,
                ap: Some(out.ap),
                mota: Some(out.mota),
                metadata: Default::default(),
            };
            report.metadata.insert("ids_issued".into(), out.ids_issued.into());
            report.metadata.insert("seed".into(), a.scenario.seed.into());
            fs::create_dir_all(&a.out_dir)?;
            write_json(&doc, a.out_dir.join("poses.json"))?;
            write_json(&report, a.out_dir.join("metrics.json"))
        }
    }
}

fn with_path<T>(p: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))),
        e => e,
    })
}

fn load<D: posefuse::io::json::Document>(p: &Path) -> Result<D> {
    with_path(p, read_json(p))
}

fn load_tensor(p: &Path) -> Result<ndarray::ArrayD<f32>> {
    with_path(p, read_tensor(p))
}

fn radius(g: &GridArgs) -> f64 {
    g.radius.unwrap_or(g.stride as f64)
}

fn scenario(a: &ScenarioArgs) -> ScenarioConfig {
    ScenarioConfig {
        seed: a.seed,
        n_people: a.people,
        image_w: a.width,
        image_h: a.height,
        candidates_per_gt: a.candidates,
        box_jitter: a.box_jitter,
        map_noise: a.map_noise,
        embedding_dim: a.embedding_dim,
        embedding_noise: a.embedding_noise,
        ..ScenarioConfig::default()
    }
}

fn sequence(a: &ScenarioArgs) -> Result<Sequence> {
    let cfg = scenario(a);
    if a.crossing {
        synth::crossing_sequence(&cfg, a.frames)
    } else {
        synth::generate_sequence(&cfg, a.frames)
    }
}

fn gbg_config(p: &GbgParams) -> GbgConfig {
    GbgConfig { min_side: p.min_side, egt_score: p.egt_score, egt_iou: p.egt_iou, group_iou: p.group_iou, top_n: p.top_n }
}

fn oks_params(coco: bool, k: usize) -> Result<OksParams> {
    if !coco {
        return Ok(OksParams::uniform(k, 0.1));
    }
    if k != posefuse::geometry::COCO_KEYPOINTS {
        return Err(Error::InvalidInput(format!("COCO falloffs need 17 keypoints, got {k}")));
    }
    Ok(OksParams::coco())
}

fn nms_config(p: &NmsParams, k: usize) -> Result<NmsConfig> {
    Ok(NmsConfig { iou_thresh: p.nms_iou, oks_thresh: p.nms_oks, oks_params: oks_params(p.coco_kappa, k)? })
}

fn track_config(p: &TrackParams) -> TrackConfig {
    TrackConfig { lambda_spatial: p.lambda, tau: p.tau, match_thresh: p.match_thresh, max_age: p.max_age }
}

fn synth_cmd(a: &ScenarioArgs, out_dir: &Path) -> Result<()> {
    let cfg = scenario(a);
    let seq = sequence(a)?;
    let mut gt = PoseDocument::new(posefuse::geometry::COCO_KEYPOINTS);
    let mut boxes = BoxDocument::new();
    for (f, scene) in seq.frames.iter().enumerate() {
        let mut instances = Vec::with_capacity(scene.len());
        for p in 0..scene.len() {
            let inst = ScoredInstance::new(scene.boxes[p].with_score(1.0), scene.poses[p].clone())?;
            let emb = synth::observe_embedding(&cfg, &seq, f, p);
            instances.push(InstanceJson::from_instance(&inst, Some(scene.ids[p]), Some(&emb)));
        }
        gt.frames.push(FrameJson { frame: f as u64, instances });
        let cands = synth::generate_candidates(&scene.boxes, &cfg, f as u32);
        boxes.frames.push(BoxFrameJson { frame: f as u64, boxes: cands.iter().map(BoxJson::from_box).collect(), fallback: false });
    }
    fs::create_dir_all(out_dir)?;
    write_json(&gt, out_dir.join("gt.json"))?;
    write_json(&boxes, out_dir.join("boxes.json"))
}

fn pick(doc: &PoseDocument, frame: u64, index: usize) -> Result<ScoredInstance> {
    doc.frames
        .iter()
        .find(|f| f.frame == frame)
        .and_then(|f| f.instances.get(index))
        .ok_or_else(|| Error::Schema(format!("no instance {index} in frame {frame}")))?
        .to_instance()
}

fn mean_error(pred: &Pose, gt: &Pose) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Schema(format!("decoded {} keypoints, ground truth has {}", pred.len(), gt.len())));
    }
    let d: Vec<f64> = pred
        .keypoints
        .iter()
        .zip(&gt.keypoints)
        .filter(|(_, g)| g.visibility.is_labeled())
        .map(|(p, g)| p.dist_sq(g).sqrt())
        .collect();
    if d.is_empty() {
        return Err(Error::UndefinedMetric("no labeled ground-truth keypoints".into()));
    }
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

fn sorted_frames(doc: &PoseDocument) -> Vec<&FrameJson> {
    let mut v: Vec<&FrameJson> = doc.frames.iter().collect();
    v.sort_by_key(|f| f.frame);
    v
}

fn evaluate(pred: &PoseDocument, gt: &PoseDocument, params: &OksParams, mota_thresh: f64) -> Result<MetricReport> {
    let mut frames: BTreeMap<u64, (Vec<&InstanceJson>, Vec<&InstanceJson>)> = BTreeMap::new();
    for f in &pred.frames {
        frames.entry(f.frame).or_default().0.extend(&f.instances);
    }
    for f in &gt.frames {
        frames.entry(f.frame).or_default().1.extend(&f.instances);
    }

    let mut preds = Vec::with_capacity(frames.len());
    let mut gts = Vec::with_capacity(frames.len());
    for (p, g) in frames.values() {
        preds.push(p.iter().map(|i| i.to_instance()).collect::<Result<Vec<_>>>()?);
        gts.push(
            g.iter()
                .map(|i| i.to_instance().map(|s| GroundTruth { pose: s.pose, bbox: s.bbox }))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let ap = evaluate_ap(&preds, &gts, params)?;

    let has_ids = |d: &PoseDocument| d.frames.iter().flat_map(|f| &f.instances).all(|i| i.track_id.is_some());
    let gt_tracked = gt.frames.iter().any(|f| !f.instances.is_empty());
    let mota = if gt_tracked && has_ids(pred) && has_ids(gt) {
        let pt = frames.values().map(|(p, _)| tracks(p)).collect::<Result<Vec<_>>>()?;
        let gtt = frames.values().map(|(_, g)| tracks(g)).collect::<Result<Vec<_>>>()?;
        Some(evaluate_mota(&pt, &gtt, mota_thresh)?)
    } else {
        None
    };

    let mut report = MetricReport { schema_version: io::json::SCHEMA_VERSION, ap: Some(ap), mota, metadata: Default::default() };
    report.metadata.insert("frames".into(), frames.len().into());
    Ok(report)
}

fn tracks(list: &[&InstanceJson]) -> Result<Vec<TrackedPose>> {
    list.iter()
        .map(|i| Ok(TrackedPose { track_id: i.track_id.unwrap_or_default(), pose: i.to_instance()?.pose }))
        .collect()
}
