//! Sequential vs rayon ensemble maps on small exact realizations and on the
//! seed-averaged two-point function.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use twoband::correlations::two_point_single;
use twoband::model::{build_model, random_lower_band_state, realization_seeds, ModelParams};
use twoband::parallel::map_indexed_sequential;
use twoband::propagator::{evolve, IntegratorOptions, PureState};
use twoband::C64;

const REALIZATIONS: usize = 8;

fn realization(params: ModelParams, times: &[f64], k: usize) -> f64 {
    let seeds = realization_seeds(7, k as u64);
    let model = build_model(params, seeds.coupling).unwrap();
    let chi = random_lower_band_state(&model, seeds.state);
    let psi = PureState::product([C64::new(0.0, 0.0), C64::new(1.0, 0.0)], &chi);
    evolve(&model, &psi, times, &IntegratorOptions::default()).unwrap().last().rho.rho11()
}

fn two_point(params: ModelParams, taus: &[f64], k: usize) -> C64 {
    let model = build_model(params, k as u64).unwrap();
    taus.iter().map(|&t| two_point_single(&model, t)).sum()
}

fn exact_ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_ensemble");
    group.sample_size(10);
    for n in [32usize, 64] {
        let params = ModelParams::new(n, n, 0.5, 0.01).unwrap();
        let times: Vec<f64> = (1..=20).map(|k| k as f64 * 5.0).collect();
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| map_indexed_sequential(REALIZATIONS, |k| realization(params, black_box(&times), k)))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| twoband::parallel::map_indexed_parallel(REALIZATIONS, |k| realization(params, black_box(&times), k)))
        });
    }
    group.finish();
}

fn two_point_average(c: &mut Criterion) {
    let mut group = c.benchmark_group("two_point");
    group.sample_size(10);
    let params = ModelParams::new(200, 200, 0.5, 5e-4).unwrap();
    let taus: Vec<f64> = (0..=40).map(|k| k as f64 * 0.5).collect();
    group.bench_function("sequential", |b| b.iter(|| map_indexed_sequential(32, |k| two_point(params, black_box(&taus), k))));
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| twoband::parallel::map_indexed_parallel(32, |k| two_point(params, black_box(&taus), k)))
    });
    group.finish();
}

criterion_group!(benches, exact_ensemble, two_point_average);
criterion_main!(benches);
