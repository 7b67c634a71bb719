use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use logvec_bench::{log_lines, random_window, template_store};
use logvec_core::embedding::nearest_template;
use logvec_core::nn::{backward, bilstm_forward, BiLstmParams, ModelConfig, Objective, Target};
use logvec_core::parser::{ParserConfig, ParserState};
use std::hint::black_box;

fn parser(c: &mut Criterion) {
    let lines = log_lines(10_000);
    let mut g = c.benchmark_group("parser");
    g.throughput(Throughput::Elements(lines.len() as u64));
    g.bench_function("parse_stream_10k", |b| {
        b.iter_batched(
            || ParserState::new(ParserConfig::default()).unwrap(),
            |mut p| black_box(p.parse_stream(&lines)),
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

fn bilstm(c: &mut Criterion) {
    let config = ModelConfig {
        embed_dim: 32,
        hidden_size: 24,
        window: 5,
        num_classes: 10,
        objective: Objective::Classification,
    };
    let params = BiLstmParams::init(&config, 0).unwrap();
    let window = random_window(config.window, config.embed_dim, 2);
    c.bench_function("bilstm_forward_d32_h24_w5", |b| {
        b.iter(|| black_box(bilstm_forward(&params, black_box(&window)).unwrap()))
    });
    c.bench_function("bilstm_backward_d32_h24_w5", |b| {
        b.iter(|| {
            black_box(backward(&params, black_box(&window), Target::Class(3), &config).unwrap())
        })
    });
}

fn nearest(c: &mut Criterion) {
    let store = template_store(500, 64);
    let query = random_window(1, 64, 3).remove(0);
    c.bench_function("nearest_template_500x64", |b| {
        b.iter(|| black_box(nearest_template(black_box(&query), &store, 0.3).unwrap()))
    });
}

criterion_group!(benches, parser, bilstm, nearest);
criterion_main!(benches);
