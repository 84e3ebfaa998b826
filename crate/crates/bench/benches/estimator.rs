use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use wfi_core::estimator::{cusum_diagram, greatest_convex_minorant};
use wfi_core::model::sample_dataset;
use wfi_core::{npmle_fit, pava_fit, Scenario};

fn fits(c: &mut Criterion) {
    let scn = Scenario::default().with_exponent(0.25);
    let mut group = c.benchmark_group("fit");
    for n in [1_000u64, 10_000, 100_000] {
        let s = sample_dataset(&scn, n, 1).unwrap();
        group.bench_with_input(BenchmarkId::new("hull", n), &s, |b, s| b.iter(|| npmle_fit(black_box(s))));
        group.bench_with_input(BenchmarkId::new("pava", n), &s, |b, s| b.iter(|| pava_fit(black_box(s))));
        let d = cusum_diagram(&s);
        group.bench_with_input(BenchmarkId::new("minorant_only", n), &d, |b, d| {
            b.iter(|| greatest_convex_minorant(black_box(d)))
        });
    }
    group.finish();
}

criterion_group!(benches, fits);
criterion_main!(benches);
