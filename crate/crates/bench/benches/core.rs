use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use crpred_core::bounds::{prediction_bound_with, qep};
use crpred_core::catalog;
use crpred_core::covariance::{covariance_bound, DiscreteJoint};
use crpred_core::l2diff::fisher_information;
use crpred_core::model::substream;
use crpred_core::reconstruction::{reconstruct_a, ParameterPath};
use crpred_core::IntegrationSpec;

fn fisher(c: &mut Criterion) {
    let g = catalog::gaussian_mean(2).unwrap();
    let p = catalog::poisson(3).unwrap();
    let ar = catalog::ar1_prediction(20).unwrap();
    let mut group = c.benchmark_group("fisher");
    group.bench_function("gaussian_mean_2d_quadrature_48", |b| {
        b.iter(|| fisher_information(g.model.as_ref(), black_box(&[0.3, -0.2]), &IntegrationSpec::quadrature(48)))
    });
    group.bench_function("poisson_3_exact", |b| {
        b.iter(|| fisher_information(p.model.as_ref(), black_box(&[2.0]), &IntegrationSpec::exact()))
    });
    group.sample_size(10);
    group.bench_function("ar1_20_monte_carlo_1e5", |b| {
        b.iter(|| fisher_information(ar.model.as_ref(), black_box(&[0.5]), &IntegrationSpec::monte_carlo(100_000, 1)))
    });
    group.finish();
}

fn covariance(c: &mut Criterion) {
    let joints: Vec<DiscreteJoint> = (0..64)
        .map(|i| {
            let mut rng = substream(9, i);
            DiscreteJoint::random(&mut rng, 3, 3, 12, 1e6)
        })
        .collect();
    c.bench_function("covariance_bound_64_joints", |b| {
        b.iter(|| joints.iter().map(|j| covariance_bound(j).unwrap().min_eigenvalue).sum::<f64>())
    });
}

fn bounds(c: &mut Criterion) {
    let e = catalog::gaussian_location(10, 1.0).unwrap();
    let (p, g) = (e.predictor("median").unwrap(), e.predictand("theta").unwrap());
    let mut group = c.benchmark_group("bound");
    group.sample_size(10);
    group.bench_function("gaussian_10_median_mc_2e4", |b| {
        b.iter(|| {
            prediction_bound_with(
                e.model.as_ref(),
                black_box(&[0.5]),
                p,
                g,
                &IntegrationSpec::monte_carlo(20_000, 3),
                &IntegrationSpec::quadrature(200),
            )
        })
    });
    group.bench_function("qep_gaussian_10_mc_2e4", |b| {
        b.iter(|| qep(e.model.as_ref(), black_box(&[0.5]), p, g, &IntegrationSpec::monte_carlo(20_000, 3)))
    });
    group.finish();
}

fn reconstruction(c: &mut Criterion) {
    let e = catalog::gaussian_location(1, 1.0).unwrap();
    let g = e.predictand("theta").unwrap();
    let path = ParameterPath::straight(&[0.0], &[1.0]).unwrap().with_steps(200);
    let mut group = c.benchmark_group("reconstruct_a");
    group.sample_size(10);
    group.bench_function("gaussian_200_steps", |b| {
        b.iter(|| reconstruct_a(e.model.as_ref(), &path, g, &IntegrationSpec::quadrature(200)))
    });
    group.finish();
}

criterion_group!(benches, fisher, covariance, bounds, reconstruction);
criterion_main!(benches);
