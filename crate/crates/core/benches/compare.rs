use criterion::{criterion_group, criterion_main, Criterion};

use abac_bandit::harness::{
    compare_algorithms, compare_algorithms_sequential, Algorithm, DatasetSpec, ExperimentConfig,
    Reference, RunSettings,
};
use abac_bandit::learners::Exploration;

fn cells() -> Vec<ExperimentConfig> {
    let algorithms = [
        Algorithm::Bandit(Exploration::EpsilonGreedy { epsilon: 0.05 }),
        Algorithm::Bandit(Exploration::ExploreFirst { k: 100 }),
        Algorithm::Bandit(Exploration::Bagging { bags: 4 }),
        Algorithm::Bandit(Exploration::OnlineCover {
            policies: 2,
            psi: 0.01,
        }),
        Algorithm::Reference(Reference::Supervised),
    ];
    let mut out = Vec::new();
    for id in ["m1", "m2"] {
        for a in algorithms {
            let dataset = DatasetSpec::Builtin {
                id: id.into(),
                seed: None,
                fraction: Some(0.5),
                shuffle: true,
            };
            out.push(ExperimentConfig::new(dataset, RunSettings::new(a, 0)));
        }
    }
    out
}

fn bench(c: &mut Criterion) {
    let cells = cells();
    let mut g = c.benchmark_group("compare_matrix");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| compare_algorithms(&cells)));
    g.bench_function("sequential", |b| {
        b.iter(|| compare_algorithms_sequential(&cells))
    });
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
