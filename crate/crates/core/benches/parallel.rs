//! Parallel core against a one-thread pool on the same workloads.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use splitmap_core::direction::FrameAnchors;
use splitmap_core::fields::ScalarField;
use splitmap_core::gougu::{segment_inequality_check, IntegralConfig};
use splitmap_core::splitting::{harmonic_replacement, quasi_isometry_stats, HarmonicConfig};
use splitmap_core::{Manifold, ManifoldSpec, Point};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut v = vec![("sequential".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    v.push((format!("parallel-{all}"), rayon::ThreadPoolBuilder::new().num_threads(all).build().unwrap()));
    v
}

fn bench(c: &mut Criterion) {
    let flat = Manifold::build(&ManifoldSpec::euclidean(2, 200.0), 0).unwrap();
    let cone = Manifold::build(&ManifoldSpec::cone(2, 0.9, 3.0), 0).unwrap();
    let anchors = FrameAnchors::axis(&flat, &flat.center(), 1.0, 50.0).unwrap();
    let one = ScalarField::from_fn("one", |_| Some(1.0));
    let q = Point::new(&[1.0, 0.0]);
    let d0 = flat.distance(&flat.center(), &q);
    let b = ScalarField::distance(&flat, &q).map("b", move |v| v - d0);
    let cfg = IntegralConfig { quadrature: 2000, ..Default::default() };

    let mut g = c.benchmark_group("parallel-vs-sequential");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::new("quasi-isometry", &name), &pool, |bch, pool| {
            bch.iter(|| pool.install(|| quasi_isometry_stats(&flat, &anchors, 2000, 1).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("segment-inequality-cone", &name), &pool, |bch, pool| {
            bch.iter(|| pool.install(|| segment_inequality_check(&cone, &cone.center(), 1.0, &one, 2000, 1, &cfg).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("harmonic-replacement", &name), &pool, |bch, pool| {
            let h = HarmonicConfig { nodes: 5000, ..Default::default() };
            bch.iter(|| pool.install(|| harmonic_replacement(&flat, &flat.center(), 0.2, &b, &h).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
