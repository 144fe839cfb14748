use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use replygraph_bench::workload;
use replygraph_core::eval::stream_predict;
use replygraph_core::graphormer::build_distance_matrix;
use replygraph_core::synth::{generate, GenSpec};
use replygraph_core::{encode_graph, EncoderSpec, ModelKind};

fn encoding(c: &mut Criterion) {
    let w = workload(ModelKind::Graphormer, 256, 3);
    let spec = EncoderSpec::default();
    c.bench_function("encode_graph/256", |b| b.iter(|| encode_graph(black_box(&w.graph), &spec)));
    c.bench_function("distance_matrix/256", |b| {
        b.iter(|| build_distance_matrix(black_box(&w.graph), 8))
    });
}

fn streaming(c: &mut Criterion) {
    let mut group = c.benchmark_group("stream_predict");
    for kind in ModelKind::ALL {
        let w = workload(kind, 64, 4);
        group.bench_with_input(BenchmarkId::new(kind.as_str(), 64), &w, |b, w| {
            b.iter(|| stream_predict(&w.model, black_box(&w.graph), &w.model.encoder).unwrap())
        });
    }
    group.finish();
}

fn generation(c: &mut Criterion) {
    let spec = GenSpec {
        seed: 5,
        num_graphs: 100,
        ..GenSpec::default()
    };
    c.bench_function("generate/100", |b| b.iter(|| generate(black_box(&spec)).unwrap()));
}

criterion_group!(benches, encoding, streaming, generation);
criterion_main!(benches);
