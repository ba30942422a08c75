use criterion::{black_box, criterion_group, criterion_main, Criterion};

use setembed::query::{Literal, Query};
use setembed::VecStrategy;
use setembed_bench::{random_box_model, random_vector_model, rng};

fn triple_difference() -> Query {
    Query::new(vec![
        Literal { attribute: 0, negated: false },
        Literal { attribute: 1, negated: false },
        Literal { attribute: 2, negated: true },
    ])
    .unwrap()
}

fn bench_scoring(c: &mut Criterion) {
    let mut rng = rng(2);
    let items = 10_000;
    let query = triple_difference();

    let box_model = random_box_model(&mut rng, items, 20, 25);
    c.bench_function("rank_items/box/10k", |bench| {
        bench.iter(|| box_model.rank_items(black_box(&query), 50).unwrap())
    });

    let vec_model = random_vector_model(&mut rng, items, 20, 50);
    c.bench_function("rank_items/vector-probabilistic/10k", |bench| {
        bench.iter(|| {
            vec_model
                .rank_items(black_box(&query), VecStrategy::Probabilistic, 50)
                .unwrap()
        })
    });
    c.bench_function("rank_items/vector-algebraic/10k", |bench| {
        bench.iter(|| {
            vec_model
                .rank_items(black_box(&query), VecStrategy::Algebraic, 50)
                .unwrap()
        })
    });
}

criterion_group!(benches, bench_scoring);
criterion_main!(benches);
