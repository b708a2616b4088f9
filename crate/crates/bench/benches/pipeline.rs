use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spectraqa::evalkit::MetricReport;
use spectraqa::retrieval::{Index, RetrieverKind};
use spectraqa_bench::{answer_pairs, synthetic};

fn index_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("index_build");
    for docs in [200, 1000] {
        let (snapshot, _) = synthetic(docs);
        for kind in RetrieverKind::ALL {
            group.bench_with_input(BenchmarkId::new(kind.as_str(), docs), &snapshot, |b, s| {
                b.iter(|| Index::build(black_box(s), kind, None))
            });
        }
    }
    group.finish();
}

fn retrieval(c: &mut Criterion) {
    let mut group = c.benchmark_group("top10_all_queries");
    let (snapshot, queries) = synthetic(1000);
    for kind in RetrieverKind::ALL {
        let index = Index::build(&snapshot, kind, None);
        group.bench_function(kind.as_str(), |b| {
            b.iter(|| {
                for q in &queries {
                    black_box(index.retrieve_top_k(&q.query, 10).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let pairs = answer_pairs();
    c.bench_function("lexical_metrics", |b| {
        b.iter(|| {
            for (cand, reference) in &pairs {
                black_box(MetricReport::lexical(cand, reference).unwrap());
            }
        })
    });
}

criterion_group!(benches, index_build, retrieval, metrics);
criterion_main!(benches);
