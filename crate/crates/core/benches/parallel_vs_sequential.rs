//! Data-parallel kernels with one worker versus the full pool.
//!
//! With the default `parallel` feature each workload runs inside a rayon
//! pool of one thread and of all available threads. Built with
//! `--no-default-features` the same workloads run through the sequential
//! fallback and are reported under `sequential`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use levy_core::density::{invert_density, InversionSpec};
use levy_core::flagship;
use levy_core::lattice::Grid;
use levy_core::resolvent::{Extension, SpaceTimeFunction, SpectralGenerator};
use levy_core::simulate::{Sampler, SamplerModel, StableScheme};
use std::hint::black_box;

fn workloads(c: &mut Criterion) {
    let s = flagship::stable();
    let spec = InversionSpec::new(Grid::new(1, 1 << 16, 512.0).unwrap()).fixed_extent();
    let grid = Grid::new(1, 4096, 64.0).unwrap();
    let generator = SpectralGenerator::new(&s, grid).unwrap();
    let times: Vec<f64> = (0..=20).map(|j| 0.02 * j as f64).collect();
    let g = SpaceTimeFunction::from_fn(grid, times, Extension::Zero, |t, x| {
        (x[0] + t).cos() * (-x[0] * x[0] / 50.0).exp()
    })
    .unwrap();
    let model = levy_core::approx::truncate_kernel(&flagship::kernel(), 0.05).unwrap();
    let sampler = Sampler::new(
        SamplerModel::from_triple(&flagship::triple()),
        Some(model),
        1e-3,
        StableScheme::Exact,
        1,
    )
    .unwrap();

    #[cfg(feature = "parallel")]
    let configs: Vec<(String, Option<rayon::ThreadPool>)> = {
        let all = std::thread::available_parallelism().map_or(1, |n| n.get());
        let mut counts = vec![1];
        if all > 1 {
            counts.push(all);
        }
        counts
            .into_iter()
            .map(|t| {
                (
                    format!("threads={t}"),
                    Some(
                        rayon::ThreadPoolBuilder::new()
                            .num_threads(t)
                            .build()
                            .unwrap(),
                    ),
                )
            })
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let configs: Vec<(String, Option<()>)> = vec![("sequential".to_string(), None)];

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for (label, pool) in &configs {
        group.bench_function(BenchmarkId::new("density_2^16", label), |b| {
            b.iter(|| in_pool(pool, || black_box(invert_density(&s, 0.01, &spec).unwrap())))
        });
        group.bench_function(BenchmarkId::new("resolvent_4096x21", label), |b| {
            b.iter(|| in_pool(pool, || black_box(generator.resolve(10.0, &g).unwrap())))
        });
        group.bench_function(BenchmarkId::new("paths_2000x100", label), |b| {
            b.iter(|| {
                in_pool(pool, || {
                    black_box(sampler.terminal_values(2000, 0.0, &[0.0], 0.1).unwrap())
                })
            })
        });
    }
    group.finish();
}

#[cfg(feature = "parallel")]
fn in_pool<T: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> T + Send) -> T {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn in_pool<T>(_: &Option<()>, f: impl FnOnce() -> T) -> T {
    f()
}

criterion_group!(benches, workloads);
criterion_main!(benches);
