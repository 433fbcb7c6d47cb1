//! Seeded inputs shared by the benchmarks.

use otproto::{init_prototypes, FeatureGrid, PrototypeSet, ScaleData};

/// A grid with `N(0, 1)` features drawn from `seed`.
pub fn random_grid(height: usize, width: usize, dim: usize, seed: u64) -> FeatureGrid {
    let bank = init_prototypes(1, height, width, dim, 0.0, 2, seed, 0.0, 1.0).unwrap();
    FeatureGrid::new(height, width, dim, 2, bank.weights().to_vec()).unwrap()
}

pub fn random_bank(per_cell: usize, height: usize, width: usize, dim: usize, alpha: f32) -> PrototypeSet {
    init_prototypes(per_cell, height, width, dim, alpha, 2, 1, 0.0, 1.0).unwrap()
}

pub fn random_batch(count: usize, height: usize, width: usize, dim: usize) -> Vec<FeatureGrid> {
    (0..count).map(|k| random_grid(height, width, dim, 100 + k as u64)).collect()
}

pub fn random_dataset(count: usize, height: usize, width: usize, dim: usize) -> Vec<ScaleData> {
    vec![ScaleData { scale_id: 2, grids: random_batch(count, height, width, dim) }]
}
