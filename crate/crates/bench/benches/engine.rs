use std::hint::black_box;

use bitarq::analytic::{ber_approx, ber_exact};
use bitarq::feedback::{combinadic_decode, combinadic_encode};
use bitarq::mc::{simulate, Scheme};
use bitarq::optimize::{optimize_threshold, optimize_window, window_design};
use bitarq::{db_to_linear, LinkModel, ProtocolConfig, Strategy};
use criterion::{criterion_group, criterion_main, Criterion};

fn design(d: usize) -> (ProtocolConfig, LinkModel) {
    let link = LinkModel::awgn(db_to_linear(5.0)).unwrap();
    let design = window_design(1024, d, 0.1, &link).unwrap();
    let config = ProtocolConfig::new(
        1024,
        d,
        Strategy::FixedWindow {
            window_fraction: 0.1,
        },
    )
    .with_thresholds(design.thresholds)
    .with_windows(design.windows);
    (config, LinkModel::awgn(design.snr_eff).unwrap())
}

fn analytic(c: &mut Criterion) {
    for d in [1, 2, 3] {
        let (config, link) = design(d);
        c.bench_function(&format!("ber_exact D={d}"), |b| {
            b.iter(|| ber_exact(black_box(&config), &link).unwrap())
        });
        c.bench_function(&format!("ber_approx D={d}"), |b| {
            b.iter(|| ber_approx(black_box(&config), &link).unwrap())
        });
    }
}

fn sweeps(c: &mut Criterion) {
    let link = LinkModel::awgn(db_to_linear(5.0)).unwrap();
    let mut group = c.benchmark_group("sweeps");
    group.sample_size(10);
    group.bench_function("optimize_window D=2", |b| {
        b.iter(|| optimize_window(1024, 2, black_box(&link)).unwrap())
    });
    group.bench_function("optimize_threshold D=2", |b| {
        b.iter(|| optimize_threshold(1024, 2, black_box(&link)).unwrap())
    });
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let (config, link) = design(2);
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    for scheme in [Scheme::Quantized, Scheme::Adaptive] {
        group.bench_function(format!("{scheme:?} 1M bits"), |b| {
            b.iter(|| simulate(&config, &link, scheme, 1 << 20, black_box(7)).unwrap())
        });
    }
    group.finish();
}

fn combinadic(c: &mut Criterion) {
    let positions: Vec<usize> = (1..=40).map(|i| i * 25).collect();
    let msg = combinadic_encode(&positions, 1024).unwrap();
    c.bench_function("combinadic_encode n=1024 w=40", |b| {
        b.iter(|| combinadic_encode(black_box(&positions), 1024).unwrap())
    });
    c.bench_function("combinadic_decode n=1024 w=40", |b| {
        b.iter(|| combinadic_decode(black_box(&msg), 1024, 40).unwrap())
    });
}

criterion_group!(benches, analytic, sweeps, monte_carlo, combinadic);
criterion_main!(benches);
