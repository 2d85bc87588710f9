//! Component benchmarks: the cost of reduction, the training speedup it
//! buys, and the shared kernel/metric primitives.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use svddkit::eval::roc_and_auc;
use svddkit::kernel::{gram_matrix, KernelSpec};
use svddkit::redbscan::{reduce, ReductionConfig};
use svddkit::svdd::{train_svdd, SvddConfig};
use svddkit_bench::{moons, one_class_blob, reduce_blob};

fn bench_reduce(c: &mut Criterion) {
    let data = moons(1000, 1);
    c.bench_function("redbscan_reduce_2000", |b| {
        b.iter(|| {
            reduce(
                black_box(&data),
                &ReductionConfig {
                    eps: None,
                    minpts: 4,
                },
            )
            .unwrap()
        })
    });
}

fn bench_svdd_training(c: &mut Criterion) {
    let full = one_class_blob(1500, 2);
    let reduced = reduce_blob(&full);
    let config = SvddConfig {
        kernel: KernelSpec::Rbf { sigma: 0.8 },
        fracrej: 0.05,
        solver_tolerance: 1e-5,
        ..Default::default()
    };
    let mut group = c.benchmark_group("svdd_train");
    group.sample_size(10);
    group.bench_function("full_1500", |b| {
        b.iter(|| train_svdd(black_box(&full), &config).unwrap())
    });
    group.bench_function(format!("reduced_{}", reduced.n_rows()), |b| {
        b.iter(|| train_svdd(black_box(&reduced), &config).unwrap())
    });
    group.finish();
}

fn bench_gram(c: &mut Criterion) {
    let data = one_class_blob(800, 3);
    let spec = KernelSpec::Rbf { sigma: 1.0 };
    c.bench_function("gram_matrix_800", |b| {
        b.iter(|| gram_matrix(&spec, black_box(&data)).unwrap())
    });
}

fn bench_auc(c: &mut Criterion) {
    let n = 20_000;
    let scores: Vec<f64> = (0..n).map(|i| ((i * 2654435761) % 1000) as f64).collect();
    let truths: Vec<u8> = (0..n).map(|i| u8::from(i % 7 == 0)).collect();
    c.bench_function("roc_auc_20k", |b| {
        b.iter(|| roc_and_auc(black_box(&scores), black_box(&truths)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_reduce,
    bench_svdd_training,
    bench_gram,
    bench_auc
);
criterion_main!(benches);
