//! Benchmarks for the hot paths: rasterization, attention, metric kernels,
//! encoders and whole-model inference.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use modecast::attention::random_neighbor_set;
use modecast::model::{ModelConfig, PredictionModel};
use modecast::{
    area_att, dist_att, generate_scenario, min_ade_k, rasterize, to_target_frame, AttentionParams,
    Point2, PredictionSet, RasterConfig, ScenarioKind, ScenarioSpec, T_F,
};

fn scenario() -> modecast::Sample {
    let raw = generate_scenario(&ScenarioSpec {
        kind: ScenarioKind::LeftTurn,
        target_speed: 8.0,
        n_neighbors: 3,
        noise_std: 0.1,
        seed: 7,
    });
    to_target_frame(&raw).unwrap()
}

fn bench_rasterize(c: &mut Criterion) {
    let sample = scenario();
    let cfg = RasterConfig::default();
    c.bench_function("rasterize_240px", |b| {
        b.iter(|| rasterize(&sample, &cfg).unwrap())
    });
}

fn bench_attention(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ns = random_neighbor_set(8, 128, &mut rng);
    let params = AttentionParams::new();
    c.bench_function("attention_dist_area_8x128", |b| {
        b.iter(|| {
            let d = dist_att(&ns, &params).unwrap();
            let a = area_att(&ns, &params).unwrap();
            (d[0], a[0])
        })
    });
}

fn bench_metrics(c: &mut Criterion) {
    let gt: Vec<Point2> = (1..=T_F).map(|t| Point2::new(t as f64, 0.0)).collect();
    let pred = PredictionSet {
        modes: (0..5)
            .map(|k| {
                (1..=T_F)
                    .map(|t| Point2::new(t as f64, k as f64 * 0.5))
                    .collect()
            })
            .collect(),
        probabilities: vec![0.2; 5],
    };
    c.bench_function("min_ade_5", |b| {
        b.iter(|| min_ade_k(&pred, &gt, 5).unwrap())
    });
}

fn bench_inference(c: &mut Criterion) {
    let sample = scenario();

    let tiny = PredictionModel::new(ModelConfig::tiny_for_tests(), 3);
    c.bench_function("predict_tiny", |b| {
        b.iter(|| tiny.predict(&sample).unwrap())
    });

    let full = PredictionModel::new(ModelConfig::default(), 3);
    let raster = rasterize(&sample, &full.cfg.raster).unwrap();
    c.bench_function("predict_default_tiny_cnn_prepared", |b| {
        b.iter(|| full.predict_prepared(&sample, Some(&raster)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_rasterize,
    bench_attention,
    bench_metrics,
    bench_inference
);
criterion_main!(benches);
