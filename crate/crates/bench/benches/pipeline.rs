use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use posefuse::nms::nms_indices;
use posefuse::pipeline::{self, PipelineConfig};
use posefuse::*;

fn random_pose(rng: &mut StdRng, w: f64, h: f64) -> Pose {
    Pose::new((0..17).map(|_| Keypoint::visible(rng.random_range(0.0..w), rng.random_range(0.0..h))).collect(), 1.0)
}

fn decoding(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(1);
    let mut g = c.benchmark_group("decode");
    for stride in [4u32, 8] {
        let enc = EncodingConfig::covering(192.0, 256.0, stride, 2.0 * stride as f64, 17).unwrap();
        let (h, o) = encode_targets(&random_pose(&mut rng, 192.0, 256.0), &enc).unwrap();
        g.bench_with_input(BenchmarkId::new("fused", stride), &stride, |b, _| {
            b.iter(|| decode(black_box(&h), black_box(&o), &enc, 1.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("smooth", stride), &stride, |b, _| b.iter(|| gaussian_smooth(black_box(&h), 1.0)));
    }
    g.finish();
}

fn boxes(rng: &mut StdRng, n: usize) -> Vec<BBox> {
    (0..n)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..400.0), rng.random_range(0.0..300.0));
            BBox::new(x, y, x + rng.random_range(40.0..120.0), y + rng.random_range(80.0..200.0), rng.random_range(0.0..1.0))
        })
        .collect()
}

fn selection(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(2);
    let mut g = c.benchmark_group("select");
    for n in [20usize, 100] {
        let cands = boxes(&mut rng, n);
        g.bench_with_input(BenchmarkId::new("gbg", n), &cands, |b, cands| {
            b.iter(|| gbg_select(black_box(cands), &GbgConfig::default()))
        });
        let insts: Vec<ScoredInstance> = cands
            .iter()
            .map(|bx| {
                let p = random_pose(&mut rng, bx.width(), bx.height()).translated(bx.x_min, bx.y_min);
                ScoredInstance::new(*bx, p).unwrap()
            })
            .collect();
        g.bench_with_input(BenchmarkId::new("nms", n), &insts, |b, insts| {
            b.iter(|| nms_indices(black_box(insts), &NmsConfig::default()))
        });
    }
    g.finish();
}

fn end_to_end(c: &mut Criterion) {
    let cfg = PipelineConfig { n_frames: 5, ..PipelineConfig::default() };
    c.bench_function("pipeline/5_frames", |b| b.iter(|| pipeline::run(black_box(&cfg)).unwrap()));
}

criterion_group!(benches, decoding, selection, end_to_end);
criterion_main!(benches);
