use criterion::{criterion_group, criterion_main, Criterion};

use setembed::boxgeom::GumbelParams;
use setembed::training::{fit, LossKind, ModelKind, TrainConfig};
use setembed_bench::{random_observations, rng};

fn bench_training(c: &mut Criterion) {
    let mut rng = rng(3);
    let data = random_observations(&mut rng, 1000, 50, 5000);
    let base = TrainConfig {
        batch_size: 128,
        learning_rate: 0.1,
        reg_coeff: 1e-4,
        neg_items: 5,
        neg_attrs: 3,
        epochs: 1,
        loss: LossKind::CrossEntropy,
        margin: 1.0,
        seed: 0,
        dims: 50,
        temps: GumbelParams { beta: 0.01, tau: 1.0 },
    };

    let mut group = c.benchmark_group("fit_one_epoch");
    group.sample_size(10);
    group.bench_function("vector-ce/1k-items", |bench| {
        bench.iter(|| fit(&data, &base, ModelKind::Vector).unwrap())
    });
    let box_cfg = TrainConfig {
        loss: LossKind::BoxBce,
        reg_coeff: 0.0,
        ..base.clone()
    };
    group.bench_function("box-bce/1k-items", |bench| {
        bench.iter(|| fit(&data, &box_cfg, ModelKind::Box).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_training);
criterion_main!(benches);
