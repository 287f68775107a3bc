//! Timings for the three hot paths: exact MRF minimization, graph
//! construction from a segmentation, and a full matching run.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use areamatch::mrf::{graph_cut, random_instance};
use areamatch::pipeline::{graph_from_segmentation, match_pair, MatchInputs};
use areamatch_benches::Fixture;

fn bench_graph_cut(c: &mut Criterion) {
    let mut group = c.benchmark_group("graph_cut");
    for &nodes in &[15usize, 60, 240] {
        let inst = random_instance(7, nodes);
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &inst, |b, inst| {
            b.iter(|| graph_cut(std::hint::black_box(inst)))
        });
    }
    group.finish();
}

fn bench_graph_build(c: &mut Criterion) {
    let fx = Fixture::perturbed(3);
    c.bench_function("graph_from_segmentation", |b| {
        b.iter(|| graph_from_segmentation(std::hint::black_box(&fx.seg0), &fx.cfg.graph).unwrap())
    });
}

fn bench_match_pair(c: &mut Criterion) {
    let fx = Fixture::perturbed(3);
    let inputs = MatchInputs {
        g0: &fx.g0,
        g1: &fx.g1,
        native0: fx.scene.dims,
        native1: fx.scene.dims,
    };
    c.bench_function("match_pair", |b| {
        b.iter(|| match_pair(std::hint::black_box(&inputs), &fx.provider, &fx.cfg).unwrap())
    });
}

criterion_group!(benches, bench_graph_cut, bench_graph_build, bench_match_pair);
criterion_main!(benches);
