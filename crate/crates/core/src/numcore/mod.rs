//! Dense matrices, the labeled feature dataset, small dense linear algebra,
//! and the seeded generator every randomized operation draws from.

mod dataset;
pub mod linalg;
mod matrix;

pub use dataset::{FeatureDataset, Flattened, FrameRef, Sequence};
pub use matrix::{l2_normalize_columns, Matrix, NormalizedColumns};

use rand::SeedableRng;

/// Generator used throughout; ChaCha8 streams are identical across platforms.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
