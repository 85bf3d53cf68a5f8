use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kpa_core::fixtures::pristine_texture;
use kpa_core::metrics::{fit_gaussian, fit_niqe_model, frechet_distance, mscn, niqe_score, NiqeConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frechet(c: &mut Criterion) {
    let mut g = c.benchmark_group("frechet_distance");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for d in [64, 256] {
        let mut stats = || fit_gaussian(&DMatrix::from_fn(2 * d, d, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let (a, b) = (stats(), stats());
        g.bench_with_input(BenchmarkId::from_parameter(d), &(a, b), |bch, (a, b)| {
            bch.iter(|| frechet_distance(black_box(a), black_box(b)).unwrap())
        });
    }
    g.finish();
}

fn niqe(c: &mut Criterion) {
    let im = pristine_texture(3, 384, 384);
    c.bench_function("mscn_384", |b| b.iter(|| mscn(black_box(&im), 7.0 / 6.0).unwrap()));
    let cfg = NiqeConfig::default();
    let pristine: Vec<_> = (0..12).map(|i| pristine_texture(100 + i, 192, 192)).collect();
    let model = fit_niqe_model(&pristine, &cfg).unwrap();
    c.bench_function("niqe_score_384", |b| b.iter(|| niqe_score(black_box(&im), &model).unwrap()));
}

criterion_group!(benches, frechet, niqe);
criterion_main!(benches);
