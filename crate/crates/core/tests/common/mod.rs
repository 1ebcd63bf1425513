#![allow(dead_code)]

use kernet_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform embeddings in `[0, side]^d`, integer times in `1..=max_time`.
pub fn random_dataset(rng: &mut impl Rng, n: usize, d: usize, side: f64, max_time: u32) -> Dataset {
    let emb: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(0.0..side)).collect()).collect();
    let times: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=max_time) as f64).collect();
    let mut events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
    events[0] = true;
    Dataset::from_parts(&emb, &times, &events).unwrap()
}

/// Exponential event times with rate `base * exp(slope * x0)`, uniform
/// censoring; embeddings uniform in `[0, side]^d`.
pub fn proportional_hazards(rng: &mut impl Rng, n: usize, d: usize, side: f64, slope: f64) -> Dataset {
    let emb: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(0.0..side)).collect()).collect();
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for e in &emb {
        let rate = 0.1 * (slope * e[0]).exp();
        let t = Exp::new(rate).unwrap().sample(rng);
        let c = rng.gen_range(0.0..30.0);
        times.push(t.min(c).max(1e-6));
        events.push(t <= c);
    }
    Dataset::from_parts(&emb, &times, &events).unwrap()
}
