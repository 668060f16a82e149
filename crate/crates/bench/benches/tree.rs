use cba_core::tree::SuffixProductTree;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn tree_ops(c: &mut Criterion) {
    let mut group = c.benchmark_group("tree");
    for n in [64usize, 1024, 16384] {
        let order: Vec<usize> = (0..n).collect();
        let initial = vec![1.0; n * 4];
        let mut tree = SuffixProductTree::build_lanes(&initial, 4, &order).unwrap();
        let mut out = [0.0; 4];
        let mut q = 0;
        group.bench_with_input(BenchmarkId::new("query_k4", n), &n, |b, &n| {
            b.iter(|| {
                q = (q + 7919) % n;
                tree.query_lanes_at(black_box(q), &mut out).unwrap();
                out[0]
            })
        });
        group.bench_with_input(BenchmarkId::new("update_k4", n), &n, |b, &n| {
            // Factors alternate so values stay in range and no rebuild occurs.
            let mut up = true;
            b.iter(|| {
                q = (q + 7919) % n;
                let f = if up { 1.01 } else { 1.0 / 1.01 };
                up = !up;
                tree.update_lanes_at(black_box(q), &[f, 1.0, f, 1.0]).unwrap();
            })
        });
    }
    group.finish();
}

criterion_group!(benches, tree_ops);
criterion_main!(benches);
