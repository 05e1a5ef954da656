//! Finite-difference check of the full-width head (F=16, G=3) on a sampled
//! subset of every tensor.

use std::time::Instant;

use histexpr::regressor::{finite_difference_check, HeadShape, RegressorModel};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn full_width_head_matches_central_differences() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let m = RegressorModel::init(16, 3, HeadShape::default(), &mut rng).unwrap();
        let z: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut idx = Vec::new();
        for (_, off, len) in m.layout().tensors() {
            idx.extend(sample(&mut rng, len, len.min(40)).into_iter().map(|i| off + i));
        }
        for c in finite_difference_check(&m, &[&z], &[&t], &idx, 1e-6).unwrap() {
            assert!(c.within(1e-4, 1e-9), "seed {seed}: {c:?}");
            if c.analytic.abs().max(c.numeric.abs()) > 1e-6 {
                worst = worst.max(c.relative_error());
            }
        }
    }
    eprintln!("worst relative error {worst:.3e} in {:.2?}", start.elapsed());
}
