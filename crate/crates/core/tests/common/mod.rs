#![allow(dead_code)]

use fwdreg_core::{standardize, Dataset};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

/// Standardized Gaussian design with an unrelated Gaussian response.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
    let x = standardize(&gaussian_matrix(rng, n, p)).unwrap().x;
    let y = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    Dataset::new(x, y).unwrap()
}

/// Random support of the given size, in random order.
pub fn random_support(rng: &mut ChaCha8Rng, p: usize, k: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, p, k).into_vec()
}

pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}
