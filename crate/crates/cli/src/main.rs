//! `posefuse` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 metric or
//! similarity undefined for the given input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "posefuse", version, about = "Keypoint decoding, box selection, pose NMS, tracking and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic sequence: ground-truth poses and candidate boxes.
    Synth(SynthArgs),
    /// Render target heatmaps and offsets for one pose.
    Encode(EncodeArgs),
    /// Decode heatmaps (and offsets) into keypoints.
    Decode(DecodeArgs),
    /// Greedy box generation over candidate boxes.
    Gbg(GbgArgs),
    /// Pose non-maximum suppression on combined OKS and IoU.
    Nms(NmsArgs),
    /// Assign track ids across frames.
    Track(TrackArgs),
    /// OKS average precision and keypoint MOTA.
    Eval(EvalArgs),
    /// Run the full chain on a synthetic sequence.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug, Clone)]
struct ScenarioArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    people: usize,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 640.0)]
    width: f64,
    #[arg(long, default_value_t = 480.0)]
    height: f64,
    /// Candidate boxes per person.
    #[arg(long, default_value_t = 1)]
    candidates: usize,
    /// Candidate corner noise as a fraction of box size.
    #[arg(long, default_value_t = 0.0)]
    box_jitter: f64,
    /// Additive Gaussian noise on rendered maps.
    #[arg(long, default_value_t = 0.0)]
    map_noise: f64,
    #[arg(long, default_value_t = 8)]
    embedding_dim: usize,
    #[arg(long, default_value_t = 0.02)]
    embedding_noise: f64,
    /// Two people walk through each other plus one bystander.
    #[arg(long)]
    crossing: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Writes gt.json and boxes.json here.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Copy)]
struct GridArgs {
    #[arg(long, default_value_t = 4, value_parser = parse_stride)]
    stride: u32,
    /// Disk radius in pixels; defaults to the stride.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    /// Pose JSON document.
    #[arg(long)]
    poses: PathBuf,
    #[arg(long, default_value_t = 0)]
    frame: u64,
    #[arg(long, default_value_t = 0)]
    instance: usize,
    /// Image extent covered by the maps.
    #[arg(long)]
    width: f64,
    #[arg(long)]
    height: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out_heatmaps: PathBuf,
    #[arg(long)]
    out_offsets: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    heatmaps: PathBuf,
    #[arg(long, required_unless_present = "no_offset")]
    offsets: Option<PathBuf>,
    /// Heatmap-only decoding; offsets are ignored.
    #[arg(long)]
    no_offset: bool,
    #[command(flatten)]
    grid: GridArgs,
    /// Heatmap smoothing in grid cells.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Ground-truth pose document; prints the mean keypoint error.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    gt_frame: u64,
    #[arg(long, default_value_t = 0)]
    gt_instance: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Copy)]
struct GbgParams {
    #[arg(long, default_value_t = 0.0)]
    min_side: f64,
    #[arg(long, default_value_t = 0.8)]
    egt_score: f64,
    #[arg(long, default_value_t = 0.5)]
    egt_iou: f64,
    #[arg(long, default_value_t = 0.7)]
    group_iou: f64,
    #[arg(long, default_value_t = 4)]
    top_n: usize,
}

#[derive(Args, Debug)]
struct GbgArgs {
    #[arg(long)]
    boxes: PathBuf,
    #[command(flatten)]
    params: GbgParams,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Copy)]
struct NmsParams {
    #[arg(long, default_value_t = 0.6)]
    nms_iou: f64,
    #[arg(long, default_value_t = 0.75)]
    nms_oks: f64,
    /// Per-keypoint COCO falloffs instead of a uniform 0.1 (17 keypoints only).
    #[arg(long)]
    coco_kappa: bool,
}

#[derive(Args, Debug)]
struct NmsArgs {
    #[arg(long)]
    poses: PathBuf,
    #[command(flatten)]
    params: NmsParams,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Copy)]
struct TrackParams {
    /// Weight of box IoU against appearance similarity.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    match_thresh: f64,
    #[arg(long, default_value_t = 10)]
    max_age: u32,
}

#[derive(Args, Debug)]
struct TrackArgs {
    /// Pose document with embeddings.
    #[arg(long)]
    poses: PathBuf,
    #[command(flatten)]
    params: TrackParams,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Keypoint match distance for MOTA, in pixels.
    #[arg(long, default_value_t = 10.0)]
    mota_thresh: f64,
    #[arg(long)]
    coco_kappa: bool,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    no_offset: bool,
    /// ROI aspect ratio as `w:h` or a decimal.
    #[arg(long, default_value = "3:4", value_parser = parse_ratio)]
    ratio: f64,
    #[command(flatten)]
    gbg: GbgParams,
    #[command(flatten)]
    nms: NmsParams,
    #[command(flatten)]
    track: TrackParams,
    #[arg(long, default_value_t = 10.0)]
    mota_thresh: f64,
    /// Writes poses.json and metrics.json here.
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_stride(s: &str) -> Result<u32, String> {
    let v: u32 = s.parse().map_err(|e| format!("{e}"))?;
    if posefuse::encoding::ALLOWED_STRIDES.contains(&v) {
        Ok(v)
    } else {
        Err(format!("stride must be one of {:?}", posefuse::encoding::ALLOWED_STRIDES))
    }
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let v = match s.split_once(':') {
        Some((w, h)) => {
            let w: f64 = w.trim().parse().map_err(|e| format!("{e}"))?;
            let h: f64 = h.trim().parse().map_err(|e| format!("{e}"))?;
            w / h
        }
        None => s.parse().map_err(|e| format!("{e}"))?,
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("ratio must be positive and finite".into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
