use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rekom_bench::{embedding, features, first_user, synthetic_graph};
use rekom_core::gnn::{train, Adjacency, Encoder};
use rekom_core::recommend::{build_recommendations, stratified_sample};
use rekom_core::{SampleSpec, TrainConfig};

fn recommend_and_sample(c: &mut Criterion) {
    let mut group = c.benchmark_group("recommend");
    for factor in [1, 10] {
        let graph = synthetic_graph(factor);
        let (table, matrix) = features(&graph);
        let z = embedding(&graph, &matrix);
        let source = first_user(&graph);
        let spec = SampleSpec::default();
        group.bench_function(BenchmarkId::new("build_and_sample", graph.node_count()), |b| {
            b.iter(|| {
                let rows = build_recommendations(&graph, &table, &z, black_box(&source)).unwrap();
                stratified_sample(&rows, &spec)
            })
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let graph = synthetic_graph(1);
    let (_, matrix) = features(&graph);
    let config = TrainConfig::default();
    let adj = Adjacency::from_graph(&graph);
    let encoder = Encoder::init(
        matrix.values.cols(),
        config.hidden_dim,
        config.embed_dim,
        config.layers,
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("forward", |b| b.iter(|| encoder.forward(&adj, black_box(&matrix.values))));
    let ten_epochs = TrainConfig { epochs: 10, ..config };
    group.bench_function("ten_epochs", |b| b.iter(|| train(&graph, &matrix, &ten_epochs).unwrap()));
    group.finish();
}

criterion_group!(benches, recommend_and_sample, training);
criterion_main!(benches);
