use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use domeforge::confmetric::tau_distance_bracket;
use domeforge::dome::{geodesic_distance, DEFAULT_BUDGET};
use domeforge::{build_hull, develop, gen_config, ExtPoint, Family};
use domeforge_bench::{plane_samples, random_domain, two_points};

fn hull(c: &mut Criterion) {
    let mut g = c.benchmark_group("hull");
    for n in [8, 32, 128] {
        let pts = gen_config(&Family::RandomN { n }, 1).unwrap().points;
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, p| b.iter(|| build_hull(black_box(p), 1e-10).unwrap()));
    }
    g.finish();
}

fn dome(c: &mut Criterion) {
    let d = random_domain(16, 2);
    c.bench_function("develop/16", |b| b.iter(|| develop(black_box(&d.finite.hull)).unwrap()));
    let (a, z) = two_points(&d);
    c.bench_function("geodesic_distance/16", |b| b.iter(|| geodesic_distance(&d.surface, black_box(&a), &z, DEFAULT_BUDGET)));
}

fn retract(c: &mut Criterion) {
    let mut g = c.benchmark_group("tau");
    for n in [8, 32] {
        let d = random_domain(n, 3);
        let zs = plane_samples(&d, 64);
        g.bench_with_input(BenchmarkId::from_parameter(n), &zs, |b, zs| {
            b.iter(|| zs.iter().map(|&z| d.retract(ExtPoint::Finite(z)).unwrap().h).sum::<f64>())
        });
    }
    g.finish();
}

fn bracket(c: &mut Criterion) {
    let d = random_domain(8, 4);
    let zs = plane_samples(&d, 2);
    let mut g = c.benchmark_group("tau_bracket");
    g.sample_size(10);
    g.bench_function("8", |b| b.iter(|| tau_distance_bracket(&d, zs[0], zs[1], &[40, 400]).unwrap()));
    g.finish();
}

criterion_group!(benches, hull, dome, retract, bracket);
criterion_main!(benches);
