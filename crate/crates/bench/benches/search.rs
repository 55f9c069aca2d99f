use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgap_bench::{history_fixture, search_config};
use sgap_core::search::{ehvi, encode, gp_fit, suggest};

fn surrogate(c: &mut Criterion) {
    let history = history_fixture(200);
    let x: Vec<Vec<f64>> = history.iter().map(|o| encode(&o.config).unwrap()).collect();
    let y: Vec<f64> = history.iter().map(|o| o.objectives[0]).collect();
    c.bench_function("gp_fit_200", |b| b.iter(|| gp_fit(black_box(&x), black_box(&y)).unwrap()));

    let front: Vec<[f64; 2]> = (0..50).map(|i| {
        let t = i as f64 / 50.0;
        [t, 1.0 - t.sqrt()]
    }).collect();
    c.bench_function("ehvi_front_50", |b| {
        b.iter(|| ehvi(black_box([0.3, 0.4]), [0.1, 0.2], black_box(&front), [1.1, 1.1]))
    });

    let cfg = search_config(500);
    c.bench_function("suggest_history_100", |b| {
        let h = &history[..100];
        b.iter(|| suggest(h, &mut ChaCha8Rng::seed_from_u64(0), &cfg).unwrap())
    });
}

criterion_group!(benches, surrogate);
criterion_main!(benches);
