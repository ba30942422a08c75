//! Shared fixtures for the benchmark targets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use setembed::boxmodel::{BoxModel, BoxTable};
use setembed::observations::{MatrixKind, ObservationMatrix};
use setembed::table::EmbeddingTable;
use setembed::vecmodel::{Transform, VectorModel};
use setembed::{BoxTensor, GumbelParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_box(rng: &mut ChaCha8Rng, dim: usize) -> BoxTensor {
    let mins: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let maxs: Vec<f64> = mins.iter().map(|&lo| lo + rng.gen_range(0.1..1.5)).collect();
    BoxTensor::new(mins, maxs)
}

pub fn random_box_model(rng: &mut ChaCha8Rng, items: usize, attrs: usize, dim: usize) -> BoxModel {
    let mut fill = |rows: usize| {
        let mut t = BoxTable::zeros(rows, dim);
        for r in 0..rows {
            for j in 0..dim {
                let lo = rng.gen_range(-1.0..1.0);
                t.mins.row_mut(r)[j] = lo;
                t.maxs.row_mut(r)[j] = lo + rng.gen_range(0.1..1.5);
            }
        }
        t
    };
    let item_boxes = fill(items);
    let attr_boxes = fill(attrs);
    BoxModel::new(
        item_boxes,
        attr_boxes,
        GumbelParams::new(0.01, 1.0).unwrap(),
    )
}

pub fn random_vector_model(
    rng: &mut ChaCha8Rng,
    items: usize,
    attrs: usize,
    dim: usize,
) -> VectorModel {
    let mut fill = |rows: usize| {
        let mut t = EmbeddingTable::zeros(rows, dim);
        for r in 0..rows {
            for v in t.row_mut(r) {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        t
    };
    let items = fill(items);
    let attrs = fill(attrs);
    VectorModel::new(items, attrs, Transform::Sigmoid)
}

pub fn random_observations(
    rng: &mut ChaCha8Rng,
    items: usize,
    attrs: usize,
    nnz: usize,
) -> ObservationMatrix {
    let triples: Vec<(usize, usize, f64)> = (0..nnz)
        .map(|_| (rng.gen_range(0..items), rng.gen_range(0..attrs), 1.0))
        .collect();
    ObservationMatrix::from_triples(MatrixKind::Noisy, items, attrs, triples)
        .unwrap()
        .matrix
}
