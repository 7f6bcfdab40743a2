use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use stlcalib_bench::{dataset, predictions, signal};
use stlcalib_core::calibration::{brier, ece};
use stlcalib_core::reshape::apply;
use stlcalib_core::stl::{parse_formula, robustness, stl1, stl2};
use stlcalib_core::{FormulaKind, GridSpec, ReshapeParams, Strategy};

fn bench_robustness(c: &mut Criterion) {
    let nested = parse_formula("G[1,END](F[0,3](sig > 0.5) or |delta| <= 0.2)").unwrap();
    let formulas = [
        ("stl1", stl1(0.6).unwrap()),
        ("stl2", stl2(0.05).unwrap()),
        ("nested", nested),
    ];
    let mut group = c.benchmark_group("robustness");
    for len in [8, 64, 512] {
        let s = signal(len);
        group.throughput(Throughput::Elements(len as u64));
        for (name, f) in &formulas {
            group.bench_with_input(BenchmarkId::new(*name, len), &s, |b, s| {
                b.iter(|| robustness(black_box(f), black_box(s)))
            });
        }
    }
    group.finish();
}

fn bench_reshape(c: &mut Criterion) {
    let s = signal(256);
    let mut group = c.benchmark_group("reshape");
    for strategy in [Strategy::Cms, Strategy::Eds, Strategy::Mps, Strategy::Gs] {
        let p = ReshapeParams::new(strategy);
        group.bench_function(strategy.as_str(), |b| b.iter(|| apply(black_box(&s), &p)));
    }
    group.finish();
}

fn bench_metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("metrics");
    for n in [1_000, 100_000] {
        let p = predictions(n);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("ece", n), &p, |b, p| {
            b.iter(|| ece(black_box(p), 10))
        });
        group.bench_with_input(BenchmarkId::new("brier", n), &p, |b, p| {
            b.iter(|| brier(black_box(p)))
        });
    }
    group.finish();
}

fn bench_grid_search(c: &mut Criterion) {
    let data = dataset(2_000, 42);
    let mut group = c.benchmark_group("grid_search");
    group.sample_size(10);
    for (kind, strategy) in [
        (FormulaKind::Stl1, Strategy::Eds),
        (FormulaKind::Stl3, Strategy::Cms),
    ] {
        let spec = GridSpec::new(kind, strategy);
        let id = format!("{kind}/{strategy}");
        group.bench_function(id, |b| {
            b.iter(|| stlcalib_core::tuning::grid_search(black_box(&data), &spec))
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_robustness,
    bench_reshape,
    bench_metrics,
    bench_grid_search
);
criterion_main!(benches);
