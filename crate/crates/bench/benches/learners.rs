use criterion::{criterion_group, criterion_main, Criterion};
use medml::learners::{fit_lasso_linear, fit_logistic_lasso, fit_post_lasso_linear, plugin_lambda};
use medml::simulation::{generate_dgp, SimulationDesign};

fn learners(c: &mut Criterion) {
    let data = generate_dgp(&SimulationDesign { n: 1000, p: 200, ..Default::default() }, 1);
    let x = data.covariates();
    let y = data.outcome();
    let d: Vec<f64> = data.treatment().iter().map(|&v| f64::from(v)).collect();
    let lambda = plugin_lambda(1000, 200, 1.0).unwrap() * 0.5;
    let logit_lambda = plugin_lambda(1000, 200, 0.5).unwrap() * 0.25;

    let mut g = c.benchmark_group("learners n=1000 p=200");
    g.bench_function("lasso", |b| b.iter(|| fit_lasso_linear(x, y, lambda).unwrap()));
    g.bench_function("post-lasso", |b| b.iter(|| fit_post_lasso_linear(x, y).unwrap()));
    g.bench_function("logistic lasso", |b| b.iter(|| fit_logistic_lasso(x, &d, logit_lambda).unwrap()));
    g.finish();
}

criterion_group!(benches, learners);
criterion_main!(benches);
