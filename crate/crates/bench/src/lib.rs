//! Synthetic fixtures shared by the benchmarks.

use kernet_core::{predict, Dataset, SurvivalCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform embeddings in `[0, side]^d`, integer times in `1..=max_time`, 60% events.
pub fn synthetic_dataset(seed: u64, n: usize, d: usize, side: f64, max_time: u32) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emb: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(0.0..side)).collect()).collect();
    let times: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=max_time) as f64).collect();
    let mut events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
    events[0] = true;
    Dataset::from_parts(&emb, &times, &events).expect("valid synthetic dataset")
}

/// Uniform query points in `[0, side]^d`.
pub fn synthetic_queries(seed: u64, n: usize, d: usize, side: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(0.0..side)).collect()).collect()
}

/// Predicted curves for every record of `dataset`.
pub fn predicted_curves(model: &kernet_core::KernetModel, dataset: &Dataset) -> Vec<SurvivalCurve> {
    dataset
        .records()
        .iter()
        .map(|r| predict(model, &r.embedding).expect("prediction").survival)
        .collect()
}
