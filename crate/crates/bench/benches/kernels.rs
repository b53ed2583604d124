use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use perco_core::cluster::{label_components, Bfs};
use perco_core::events::{goodness_field, EventParams};
use perco_core::renorm::{LadderParams, ScaleLadder};
use perco_core::samplers::sample_bernoulli;
use perco_core::Window;

fn bernoulli(c: &mut Criterion) {
    let mut g = c.benchmark_group("bernoulli");
    for side in [64usize, 256] {
        let w = Window::new_box(vec![0, 0], vec![side, side]).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(side), &w, |b, w| {
            b.iter(|| sample_bernoulli(0.6, black_box(w), 7))
        });
    }
    g.finish();
}

fn labeling(c: &mut Criterion) {
    let mut g = c.benchmark_group("label_components");
    for side in [64usize, 256] {
        let cfg = sample_bernoulli(0.6, &Window::new_box(vec![0, 0], vec![side, side]).unwrap(), 1);
        g.bench_with_input(BenchmarkId::from_parameter(side), &cfg, |b, cfg| b.iter(|| label_components(black_box(cfg))));
    }
    let cube = sample_bernoulli(0.35, &Window::centered(3, 20).unwrap(), 1);
    g.bench_function("d3_41", |b| b.iter(|| label_components(black_box(&cube))));
    g.finish();
}

fn bfs(c: &mut Criterion) {
    let w = Window::new_box(vec![0, 0], vec![256, 256]).unwrap();
    let cfg = sample_bernoulli(0.7, &w, 3);
    let lab = label_components(&cfg);
    let giant = lab.largest_by_size().unwrap();
    let source = lab.ids().iter().position(|&id| id as usize == giant).unwrap();
    let mut search = Bfs::for_config(&cfg);
    c.bench_function("bfs_sweep_256", |b| b.iter(|| search.sweep(&cfg, black_box(source))));
}

fn goodness(c: &mut Criterion) {
    let ladder = ScaleLadder::build(LadderParams { l0: 9, r0: 2, big_l0: 8, theta_sc: 1, kmax: 1 }).unwrap();
    let params = EventParams { big_l0: 8, eta_hat: 0.84, u: 0.0 };
    let cfg = sample_bernoulli(0.9, &Window::new_box(vec![0, 0], vec![288, 288]).unwrap(), 5);
    c.bench_function("goodness_field_288", |b| b.iter(|| goodness_field(black_box(&cfg), &ladder, &params)));
}

criterion_group!(benches, bernoulli, labeling, bfs, goodness);
criterion_main!(benches);
