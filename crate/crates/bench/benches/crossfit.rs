use criterion::{criterion_group, criterion_main, Criterion};
use medml::simulation::{generate_dgp, OracleLearner, SimulationDesign};
use medml::{estimate_effects, CrossFitConfig, EstimatorKind, PostLassoLearner};

fn crossfit(c: &mut Criterion) {
    let design = SimulationDesign { n: 1000, p: 200, ..Default::default() };
    let data = generate_dgp(&design, 1);
    let cfg = CrossFitConfig::default();
    let post_lasso = PostLassoLearner::default();
    let oracle = OracleLearner::new(&design);

    let mut g = c.benchmark_group("estimate_effects n=1000 p=200");
    g.sample_size(10);
    for (name, kinds) in [
        ("theorem1", &[EstimatorKind::Theorem1][..]),
        ("theorem2", &[EstimatorKind::Theorem2][..]),
        ("both", &EstimatorKind::BOTH[..]),
    ] {
        g.bench_function(name, |b| b.iter(|| estimate_effects(&data, &cfg, kinds, &[], &post_lasso).unwrap()));
    }
    g.bench_function("both, oracle nuisances", |b| {
        b.iter(|| estimate_effects(&data, &cfg, &EstimatorKind::BOTH, &[], &oracle).unwrap())
    });
    g.finish();
}

criterion_group!(benches, crossfit);
criterion_main!(benches);
