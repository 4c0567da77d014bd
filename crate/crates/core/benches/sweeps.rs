use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ultratree::lifting::verify_isometric_embedding;
use ultratree::moebius::ultrametric_crt_stats;
use ultratree::random::{random_tree_point, random_ultrametric, SpaceShape};
use ultratree::{BoundaryMap, Checks, FillingTree};

fn tree(n: usize) -> (FillingTree, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    (FillingTree::new(random_ultrametric(&mut rng, SpaceShape::new(n))).unwrap(), rng)
}

fn crt_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("crt_sweep");
    group.sample_size(10);
    for n in [12, 24, 40] {
        let (x, _) = tree(n);
        let rho = x.bourdon_metric(&x.default_base_point());
        for (name, checks) in [("parallel", Checks::default()), ("sequential", Checks::default().sequential())] {
            group.bench_with_input(BenchmarkId::new(name, n), &rho, |b, rho| {
                b.iter(|| ultrametric_crt_stats(rho, &checks))
            });
        }
    }
    group.finish();
}

fn embedding(c: &mut Criterion) {
    let mut group = c.benchmark_group("isometric_embedding");
    group.sample_size(10);
    for n in [16, 64] {
        let (x, mut rng) = tree(n);
        let f = BoundaryMap::identity(&x, &x, &Checks::default()).unwrap();
        let pairs: Vec<_> = (0..500)
            .map(|_| (random_tree_point(&x, &mut rng, 2.0), random_tree_point(&x, &mut rng, 2.0)))
            .collect();
        for (name, parallel) in [("parallel", true), ("sequential", false)] {
            group.bench_with_input(BenchmarkId::new(name, n), &pairs, |b, pairs| {
                b.iter(|| verify_isometric_embedding(&f, pairs, parallel).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, crt_sweep, embedding);
criterion_main!(benches);
