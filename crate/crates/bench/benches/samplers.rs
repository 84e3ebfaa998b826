use criterion::{criterion_group, criterion_main, Criterion};
use wfi_core::limits::{simulate_limit, LimitLaw, LimitSetup};
use wfi_core::{FeatureLaw, Link};

fn samplers(c: &mut Criterion) {
    let mut group = c.benchmark_group("limit_100_draws");
    group.sample_size(10);
    for tag in [
        LimitLaw::ScaledChernoff,
        LimitLaw::SlowFbeta,
        LimitLaw::BoundaryGbc,
        LimitLaw::FastWSlope,
        LimitLaw::L1FastMaxA,
    ] {
        let setup = LimitSetup {
            law_tag: tag,
            link: Link::Logistic,
            law: FeatureLaw::uniform(1.0),
            x0: 0.0,
            c: 1.0,
            grid: tag.default_grid(),
        };
        group.bench_function(format!("{tag:?}"), |b| b.iter(|| simulate_limit(&setup, 100, 3).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, samplers);
criterion_main!(benches);
