use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spsp::certificates::{certify_strongly_convex, verify, VerifyOptions};
use spsp::dynamics::{certify_spas, Selection, SpasParams};
use spsp::geometry::ConvexSet;
use spsp::lemmas::{containment_level, ContainmentOptions};
use spsp::oracles::{gradient_oracle, perturb, ErrorModel};
use spsp::problems::{builtin, LyapunovField};
use spsp::{Execution, Vector};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_verify(c: &mut Criterion) {
    let s = builtin("strongly-convex-quadratic").unwrap();
    let v = LyapunovField::squared_distance(s.attractor.clone()).unwrap();
    let oracle = perturb(
        Box::new(gradient_oracle(s.field)),
        ErrorModel::worst_case(0.3, 0.2).unwrap(),
        s.attractor,
    )
    .against(v.clone());
    let cert = certify_strongly_convex(1.0, 0.3, 0.2);
    let cert = cert.feasible().unwrap().clone();
    let xi = ConvexSet::whole_space(2);
    let mut group = c.benchmark_group("verify");
    for (name, execution) in MODES {
        let opts = VerifyOptions {
            truncation: Some(10.0),
            execution,
            ..VerifyOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verify(&oracle, &v, &xi, &cert, &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_containment(c: &mut Criterion) {
    let s = builtin("strongly-convex-quadratic").unwrap();
    let phi = |y: &Vector| y.norm_squared();
    let mut group = c.benchmark_group("containment_level");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = ContainmentOptions {
            resolution: 0.005,
            execution,
            ..ContainmentOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| containment_level(&phi, &s.attractor, 0.0, 0.4, 2.0, &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_spas(c: &mut Criterion) {
    let s = builtin("strongly-convex-quadratic").unwrap();
    let v = LyapunovField::squared_distance(s.attractor.clone()).unwrap();
    let oracle = gradient_oracle(s.field);
    let xi = ConvexSet::whole_space(2);
    let params = SpasParams {
        sigma: 1.0,
        rho_a: 0.2,
        rho_s: 0.5,
        trials: 64,
        horizon: 2000,
        selection: Selection::WorstCase,
    };
    let mut group = c.benchmark_group("certify_spas");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| certify_spas(&oracle, &xi, &v, &[0.1], &params, 1, execution).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_verify, bench_containment, bench_spas);
criterion_main!(benches);
